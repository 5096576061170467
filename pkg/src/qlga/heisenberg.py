"""One-step Heisenberg images of cell algebras and the lattice-gas criterion.

Operators are conjugated through the evolution layer by layer on their own
(growing) support -- ring unitaries are never built here.  The per-offset
algebras D are obtained by compressing the evolved cell algebra onto single
cells with partial traces, so every dense object in the criterion stays at
cell scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import lattice
from .descriptor import (
    CellwiseLayer,
    GateLayer,
    QcaDescriptor,
    ShiftLayer,
    SigmaLayer,
    cell_subdims,
    dense_layers,
)
from .lattice import LocalOperator, local_operator, trim
from .opspace import OperatorSubspace, span_product


class CausalityViolation(RuntimeError):
    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = tuple(sorted(cells))


@dataclass(frozen=True)
class DAlgebraReport:
    offsets: tuple                     # neighborhood offsets, sorted
    d_dims: tuple                      # dim D_{-y,0} per offset
    span_product_dimension: int
    cell_algebra_dimension: int
    verdict: bool
    backend: str
    window: tuple | None = None
    residuals: dict = field(default_factory=dict)
    inactive_offsets: tuple = ()       # offsets whose D is scalars only

    def as_dict(self) -> dict:
        return {
            "offsets": [list(z) for z in self.offsets],
            "d_dims": list(self.d_dims),
            "span_product_dimension": self.span_product_dimension,
            "cell_algebra_dimension": self.cell_algebra_dimension,
            "verdict": "QLGA" if self.verdict else "NOT_QLGA",
            "backend": self.backend,
            "inactive_offsets": [list(z) for z in self.inactive_offsets],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


# ---------------------------------------------------------------------------
# layer-by-layer conjugation


def _conj_by_instance(op: LocalOperator, gate: LocalOperator,
                      dagger_gate: bool) -> LocalOperator:
    """g op g† (or g† op g) applied directly on the gate's tensor axes."""
    g = gate.matrix.conj().T if dagger_gate else gate.matrix
    support, dims = lattice.union_support(op, gate)
    big = lattice.embed(op, support, dims)
    k = len(support)
    t = big.matrix.reshape(dims + dims)
    pos = [support.index(s) for s in gate.support]
    full_dims = dims + dims
    t = lattice.apply_matrix_to_axes(t, g, pos, full_dims)
    t = lattice.apply_matrix_to_axes(t, g.conj(), [k + p for p in pos],
                                     full_dims)
    D = big.matrix.shape[0]
    return LocalOperator(support, dims, t.reshape(D, D))


def _conj_gate_layer(op: LocalOperator, layer: GateLayer, forward: bool,
                     max_radius: int, tol: float) -> LocalOperator:
    applied = set()
    while True:
        cells = op.cells()
        comps = {}
        for cell, comp in op.support:
            comps.setdefault(cell, set()).add(comp)
        sites = set()
        for cell in cells:
            for rel_cell, comp in layer.rel_slots:
                site = tuple(c - r for c, r in zip(cell, rel_cell))
                if layer.stride and any(s % st for s, st in zip(site, layer.stride)):
                    continue
                sites.add(site)
        todo = []
        for site in sorted(sites):
            if site in applied:
                continue
            inst_slots = [(tuple(s + c for s, c in zip(site, cell)), comp)
                          for cell, comp in layer.rel_slots]
            if any(slot[0] in comps and slot[1] in comps[slot[0]]
                   for slot in inst_slots):
                todo.append((site, inst_slots))
        if not todo:
            return op
        for site, inst_slots in todo:
            applied.add(site)
            gate = local_operator(inst_slots, layer.slot_dims, layer.matrix)
            # forward conjugation is g^dagger (.) g
            op = _conj_by_instance(op, gate, dagger_gate=forward)
        op = trim(op, tol)
        if op.support and max((max(abs(c) for c in cell) for cell in op.cells())) > max_radius:
            raise CausalityViolation(
                "conjugated support grew past radius %d" % max_radius,
                cells=op.cells())


def _relabel(op: LocalOperator, mapping) -> LocalOperator:
    support = [mapping(slot) for slot in op.support]
    return local_operator(support, op.dims, op.matrix)


def _conj_cellwise(op: LocalOperator, layer: CellwiseLayer, forward: bool,
                   tol: float) -> LocalOperator:
    m_comp = len(layer.subdims)
    for cell in sorted(op.cells()):
        slots = [(cell, c) for c in range(m_comp)]
        gate = local_operator(slots, layer.subdims, layer.matrix)
        op = _conj_by_instance(op, gate, dagger_gate=forward)
    return trim(op, tol)


def conjugate_through_layers(op: LocalOperator, d: QcaDescriptor,
                             forward: bool = True, max_radius: int | None = None,
                             tol: float = 1e-9) -> LocalOperator:
    """R†.R (forward) or R.R† (backward) of a local operator, gate by gate."""
    layers = dense_layers(d)
    if max_radius is None:
        gate_r = sum(l.radius for l in layers if isinstance(l, GateLayer))
        shift_r = sum(max(abs(c) for c in l.offset)
                      for l in layers if isinstance(l, ShiftLayer))
        base = max((max(abs(c) for c in cell) for cell in op.cells()), default=0)
        max_radius = base + d.neighborhood.radius + gate_r + shift_r + 2
    seq = list(reversed(layers)) if forward else layers
    sign = 1 if forward else -1
    for layer in seq:
        if isinstance(layer, GateLayer):
            op = _conj_gate_layer(op, layer, forward, max_radius, tol)
        elif isinstance(layer, ShiftLayer):
            o, q = layer.offset, layer.comp
            op = _relabel(op, lambda s: (
                tuple(c + sign * oc for c, oc in zip(s[0], o)), s[1])
                if s[1] == q else s)
        elif isinstance(layer, SigmaLayer):
            offsets = layer.scheme.offsets
            op = _relabel(op, lambda s: (
                tuple(c + sign * oc for c, oc in zip(s[0], offsets[s[1]])), s[1]))
        elif isinstance(layer, CellwiseLayer):
            op = _conj_cellwise(op, layer, forward, tol)
    return trim(op, tol)


def _check_support(op: LocalOperator, allowed: set, what: str):
    escape = {c for c in op.cells() if c not in allowed}
    if escape:
        raise CausalityViolation(
            "%s support escapes the declared neighborhood at cells %s"
            % (what, sorted(escape)), cells=escape)


def conjugate_forward(a: LocalOperator, d: QcaDescriptor, tol: float = 1e-9,
                      enforce: bool = True) -> LocalOperator:
    """R† a R; support must stay inside the declared neighborhood of a's cells."""
    out = conjugate_through_layers(a, d, forward=True, tol=tol)
    if enforce:
        allowed = {tuple(c + z for c, z in zip(cell, off))
                   for cell in a.cells() for off in d.neighborhood.offsets}
        _check_support(out, allowed, "forward")
    return out


def conjugate_backward(a: LocalOperator, d: QcaDescriptor, tol: float = 1e-9,
                       enforce: bool = True) -> LocalOperator:
    """R a R†; support must stay inside the reflected neighborhood V = -N."""
    out = conjugate_through_layers(a, d, forward=False, tol=tol)
    if enforce:
        allowed = {tuple(c + z for c, z in zip(cell, off))
                   for cell in a.cells() for off in d.neighborhood.reflected}
        _check_support(out, allowed, "backward")
    return out


def infer_neighborhood(d: QcaDescriptor, tol: float = 1e-9) -> tuple:
    """The actual causal neighborhood: forward support offsets of the cell-0
    algebra, united with the reflection of the backward support offsets."""
    fwd, bwd = set(), set()
    for u in cell_matrix_units(d):
        fwd |= conjugate_through_layers(u, d, forward=True, tol=tol).cells()
        bwd |= conjugate_through_layers(u, d, forward=False, tol=tol).cells()
    offsets = fwd | {tuple(-c for c in cell) for cell in bwd}
    return tuple(sorted(offsets))


# ---------------------------------------------------------------------------
# evolved algebras and the D intersections


def cell_matrix_units(d: QcaDescriptor, cell=None) -> list:
    """The d_W^2 matrix units of one cell at descriptor granularity."""
    subdims = cell_subdims(d)
    if cell is None:
        cell = (0,) * d.n
    slots = [(cell, c) for c in range(len(subdims))]
    dW = math.prod(subdims)
    units = []
    for i in range(dW):
        for j in range(dW):
            m = np.zeros((dW, dW), dtype=complex)
            m[i, j] = 1.0
            units.append(local_operator(slots, subdims, m))
    return units


def evolved_cell_algebra(d: QcaDescriptor, tol: float = 1e-9,
                         enforce: bool = True) -> list:
    """Conjugates R† e R of all matrix units of cell 0, trimmed.  Unitary
    conjugation preserves the HS Gram matrix, so the list is orthonormal."""
    return [conjugate_forward(u, d, tol=tol, enforce=enforce)
            for u in cell_matrix_units(d)]


def _cell_compression(op: LocalOperator, cell: tuple, subdims: tuple) -> np.ndarray:
    """Partial trace of a conjugated unit onto one full cell, normalized so
    that it equals the cell block when the operator is cell-local there."""
    cell_slots = [(cell, c) for c in range(len(subdims))]
    present = [s for s in cell_slots if s in set(op.support)]
    d_traced = math.prod(dd for s, dd in zip(op.support, op.dims)
                         if s not in set(cell_slots))
    reduced = lattice.partial_trace(op, present)
    reduced = LocalOperator(reduced.support, reduced.dims,
                            reduced.matrix / d_traced)
    full = lattice.embed(reduced, tuple(cell_slots), subdims)
    return full.matrix


def d_algebras(d: QcaDescriptor, tol: float = 1e-9,
               evolved: list | None = None) -> dict:
    """Per-offset D algebras at cell 0: D_{-y,0} = (translate of R_0) ∩ A_0.

    Computed entirely from Gram data: each evolved unit r is compressed onto
    cell y by partial trace; eigenvalue-1 directions of the compression Gram
    matrix are exactly the combinations lying in a single cell algebra.
    """
    subdims = cell_subdims(d)
    dW = math.prod(subdims)
    if evolved is None:
        evolved = evolved_cell_algebra(d, tol=tol)
    zero = (0,) * d.n
    slots0 = tuple((zero, c) for c in range(len(subdims)))
    out = {}
    for y in d.neighborhood.offsets:
        # D_{-y,0} = translate(R_0 ∩ A_y, -y); work with R_0 directly
        comp = np.stack([_cell_compression(r, y, subdims) for r in evolved])
        flat = comp.reshape(len(evolved), -1)
        gram = flat.conj() @ flat.T
        w, v = np.linalg.eigh(gram)
        cut = max(100 * tol, 1e-10)
        coeffs = v[:, w > 1.0 - cut].T
        mats = np.tensordot(coeffs, comp, axes=(1, 0))
        if mats.shape[0] == 0:
            mats = np.zeros((0, dW, dW), dtype=complex)
        out[y] = OperatorSubspace(slots0, subdims, mats, tol)
    return out


def _verify_d_structure(algebras: dict, dW: int, tol: float) -> dict:
    """Residuals: identity membership, self-adjointness, pairwise commuting."""
    eye = np.eye(dW, dtype=complex)
    res = {"identity": 0.0, "adjoint": 0.0, "commute": 0.0}
    items = sorted(algebras.items())
    for _, alg in items:
        c = alg.project_coeffs(eye)
        proj = (c @ alg.flat()).reshape(dW, dW)
        res["identity"] = max(res["identity"],
                              float(np.linalg.norm(proj - eye)) / math.sqrt(dW))
        for b in alg.basis:
            bd = b.conj().T
            c = alg.project_coeffs(bd)
            proj = (c @ alg.flat()).reshape(dW, dW)
            res["adjoint"] = max(res["adjoint"], float(np.linalg.norm(proj - bd)))
    for (y1, a1), (y2, a2) in itertools.combinations(items, 2):
        for b1 in a1.basis:
            for b2 in a2.basis:
                res["commute"] = max(res["commute"],
                                     float(np.linalg.norm(b1 @ b2 - b2 @ b1)))
    return res


def criterion_report(d: QcaDescriptor, tol: float = 1e-9,
                     algebras: dict | None = None) -> DAlgebraReport:
    """Check whether the per-offset D algebras span the full cell algebra."""
    subdims = cell_subdims(d)
    dW = math.prod(subdims)
    if algebras is None:
        algebras = d_algebras(d, tol=tol)
    residuals = _verify_d_structure(algebras, dW, tol)
    span = span_product([algebras[y] for y in d.neighborhood.offsets])
    dims = tuple(algebras[y].dim for y in d.neighborhood.offsets)
    inactive = tuple(y for y in d.neighborhood.offsets if algebras[y].dim == 1)
    lightcone = tuple(2 * d.neighborhood.radius + 1 for _ in range(d.n))
    return DAlgebraReport(
        offsets=d.neighborhood.offsets,
        d_dims=dims,
        span_product_dimension=span.dim,
        cell_algebra_dimension=dW * dW,
        verdict=span.dim == dW * dW,
        backend="dense",
        window=lightcone,
        residuals=residuals,
        inactive_offsets=inactive,
    )
