"""Machine-readable QCA descriptors.

A descriptor fixes the lattice dimension, the cell structure, a declared
neighborhood, and the evolution, given in one of three forms:

* ``circuit`` -- ordered layers, each one gate template applied at every
  site (``partitioned`` with a sublattice stride, or ``commuting`` with
  verified commutation of overlapping translated copies);
* ``clifford`` -- the cell is ``m`` qubits and the evolution is an ordered
  list of CNOT/CZ/H/S/X/Z rules addressed by (cell offset, qubit), plus a
  SHIFT rule that relays one qubit track between neighboring cells (needed
  for half-integer-radius automata such as the shifted partial adder);
* ``qlga`` -- an explicit lattice-gas form: per-offset component factors,
  a collision unitary F, and an optional per-cell isomorphism S.

Internally every dense computation consumes the same thing: a temporal
sequence of *layers* (gate templates, slot relabelings, cell-wise unitaries)
acting on (cell, component) slots.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    CellStructure,
    ComponentScheme,
    LatticeError,
    Neighborhood,
    RingWindow,
    apply_matrix_to_axes,
    local_operator,
    sigma_axis_order,
    window_slots,
)

DENSE_CAP = 4096


class DescriptorError(ValueError):
    """Schema or axiom violation in a descriptor document."""


class CapExceededError(RuntimeError):
    """A dense ring would exceed the ambient-dimension cap."""


class NumericalError(RuntimeError):
    """Internal numerical failure (degeneracy, failed residual check)."""


# ---------------------------------------------------------------------------
# evolution variants


@dataclass(frozen=True)
class CircuitLayer:
    mode: str                 # "partitioned" | "commuting"
    stride: tuple | None      # sublattice stride for partitioned mode
    supports: tuple           # relative cell coordinates, one per gate factor
    matrix: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CircuitEvolution:
    layers: tuple


@dataclass(frozen=True)
class CliffordGate:
    kind: str                 # CNOT | CZ | H | S | X | Z | SHIFT
    operands: tuple           # ((offset tuple, qubit index), ...)


@dataclass(frozen=True)
class CliffordEvolution:
    qubits_per_cell: int
    gates: tuple


@dataclass(frozen=True)
class QlgaEvolution:
    scheme: ComponentScheme
    collision: np.ndarray = field(repr=False)
    isomorphism: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class QcaDescriptor:
    n: int
    cell: CellStructure
    neighborhood: Neighborhood
    evolution: object
    source: dict = field(repr=False, default_factory=dict)

    @property
    def kind(self) -> str:
        if isinstance(self.evolution, CircuitEvolution):
            return "circuit"
        if isinstance(self.evolution, CliffordEvolution):
            return "clifford"
        return "qlga"


def cell_subdims(d: QcaDescriptor) -> tuple:
    """Per-component dimensions of one cell at this descriptor's granularity."""
    if d.kind == "circuit":
        return (d.cell.dim,)
    if d.kind == "clifford":
        return (2,) * d.evolution.qubits_per_cell
    return d.evolution.scheme.factor_dims


def quiescent_components(d: QcaDescriptor) -> tuple:
    """Per-component digits of the state-basis quiescent cell index.

    For a lattice-gas descriptor with an isomorphism the scheme's quiescent
    components describe the *post-isomorphism* cell, so the state-basis
    quiescent is always taken from ``cell.quiescent_index``.
    """
    if d.kind == "circuit":
        return (d.cell.quiescent_index,)
    if d.kind == "clifford":
        m = d.evolution.qubits_per_cell
        q = d.cell.quiescent_index
        return tuple((q >> (m - 1 - j)) & 1 for j in range(m))
    digits = []
    q = d.cell.quiescent_index
    for dim in reversed(d.evolution.scheme.factor_dims):
        digits.append(q % dim)
        q //= dim
    return tuple(reversed(digits))


# ---------------------------------------------------------------------------
# internal layer sequence (temporal order: first entry acts first on states)


@dataclass(frozen=True)
class GateLayer:
    matrix: np.ndarray = field(repr=False)
    rel_slots: tuple = ()        # ((rel cell, comp), ...) in operand order
    slot_dims: tuple = ()
    stride: tuple | None = None  # None: applied at every site

    @property
    def radius(self) -> int:
        return max((max(abs(c) for c in cell) for cell, _ in self.rel_slots),
                   default=0)


@dataclass(frozen=True)
class ShiftLayer:
    offset: tuple
    comp: int


@dataclass(frozen=True)
class SigmaLayer:
    scheme: ComponentScheme


@dataclass(frozen=True)
class CellwiseLayer:
    matrix: np.ndarray = field(repr=False)
    subdims: tuple = ()


_CLIFFORD_MATS = {
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
                     dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "S": np.diag([1, 1j]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}
_CLIFFORD_ARITY = {"CNOT": 2, "CZ": 2, "H": 1, "S": 1, "X": 1, "Z": 1, "SHIFT": 1}


def dense_layers(d: QcaDescriptor) -> list:
    """The evolution as a temporal layer sequence on (cell, comp) slots."""
    if d.kind == "circuit":
        out = []
        for lay in d.evolution.layers:
            k = len(lay.supports)
            out.append(GateLayer(lay.matrix,
                                 tuple((cell, 0) for cell in lay.supports),
                                 (d.cell.dim,) * k,
                                 lay.stride if lay.mode == "partitioned" else None))
        return out
    if d.kind == "clifford":
        out = []
        for g in d.evolution.gates:
            if g.kind == "SHIFT":
                (off, q), = g.operands
                out.append(ShiftLayer(off, q))
            else:
                out.append(GateLayer(_CLIFFORD_MATS[g.kind],
                                     tuple((off, q) for off, q in g.operands),
                                     (2,) * len(g.operands)))
        return out
    ev = d.evolution
    subdims = ev.scheme.factor_dims
    out = []
    if ev.isomorphism is not None:
        out.append(CellwiseLayer(ev.isomorphism, subdims))
    out.append(SigmaLayer(ev.scheme))
    out.append(CellwiseLayer(ev.collision, subdims))
    if ev.isomorphism is not None:
        out.append(CellwiseLayer(ev.isomorphism.conj().T, subdims))
    return out


# ---------------------------------------------------------------------------
# parsing


def _parse_matrix(node, path: str) -> np.ndarray:
    try:
        rows = []
        for r in node:
            rows.append([complex(e[0], e[1]) for e in r])
        m = np.array(rows, dtype=complex)
    except (TypeError, IndexError, ValueError) as exc:
        raise DescriptorError("%s: malformed complex matrix (%s)" % (path, exc))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DescriptorError("%s: matrix must be square" % path)
    return m


def _unitary_residual(m: np.ndarray) -> float:
    return float(np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0])))


def parse(document) -> QcaDescriptor:
    """Parse a descriptor from a dict, JSON string, or file path."""
    if isinstance(document, dict):
        doc = document
    else:
        text = document
        if not str(document).lstrip().startswith("{"):
            with open(document, "r", encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DescriptorError("not valid JSON: %s" % exc)

    try:
        n = int(doc["dimension"])
        cell_node = doc["cell"]
        cell = CellStructure(int(cell_node["dim"]),
                             int(cell_node.get("quiescent", 0)),
                             tuple(cell_node["labels"]) if "labels" in cell_node else None)
        nb = Neighborhood(tuple(tuple(z) for z in doc["neighborhood"]), n)
        ev_node = doc["evolution"]
        kind = ev_node["type"]
    except (KeyError, TypeError, LatticeError) as exc:
        raise DescriptorError("descriptor structure: %s" % exc)

    if kind == "circuit":
        layers = []
        for i, lay in enumerate(ev_node.get("layers", [])):
            path = "evolution.layers[%d]" % i
            mode = lay.get("mode", "commuting")
            if mode not in ("partitioned", "commuting"):
                raise DescriptorError("%s.mode: unknown mode %r" % (path, mode))
            stride = tuple(int(s) for s in lay["stride"]) if "stride" in lay else None
            if mode == "partitioned" and stride is None:
                raise DescriptorError("%s: partitioned mode requires a stride" % path)
            gate = lay["gate"]
            supports = tuple(tuple(int(c) for c in cc) for cc in gate["supports"])
            m = _parse_matrix(gate["matrix"], path + ".gate.matrix")
            if m.shape[0] != cell.dim ** len(supports):
                raise DescriptorError("%s.gate.matrix: dimension %d does not match"
                                      " %d cells of dim %d"
                                      % (path, m.shape[0], len(supports), cell.dim))
            if _unitary_residual(m) > 1e-9 * m.shape[0]:
                raise DescriptorError("%s.gate.matrix: not unitary" % path)
            layers.append(CircuitLayer(mode, stride, supports, m))
        evolution = CircuitEvolution(tuple(layers))
    elif kind == "clifford":
        m = int(ev_node["qubits_per_cell"])
        if cell.dim != 2 ** m:
            raise DescriptorError("cell.dim must equal 2^qubits_per_cell")
        gates = []
        for i, g in enumerate(ev_node.get("gates", [])):
            path = "evolution.gates[%d]" % i
            kind_g = g["kind"]
            if kind_g not in _CLIFFORD_ARITY:
                raise DescriptorError("%s.kind: unknown gate %r" % (path, kind_g))
            ops = tuple((tuple(int(c) for c in o["offset"]), int(o["qubit"]))
                        for o in g["operands"])
            if len(ops) != _CLIFFORD_ARITY[kind_g]:
                raise DescriptorError("%s: %s takes %d operands"
                                      % (path, kind_g, _CLIFFORD_ARITY[kind_g]))
            for off, q in ops:
                if len(off) != n or not (0 <= q < m):
                    raise DescriptorError("%s: bad operand address" % path)
            if len({o for o in ops}) != len(ops):
                raise DescriptorError("%s: repeated operand slot" % path)
            gates.append(CliffordGate(kind_g, ops))
        evolution = CliffordEvolution(m, tuple(gates))
    elif kind == "qlga":
        factors = ev_node["factors"]
        offs, dims, qs = [], [], []
        for f in sorted(factors, key=lambda f: tuple(f["offset"])):
            offs.append(tuple(int(c) for c in f["offset"]))
            dims.append(int(f["dim"]))
            qs.append(int(f.get("quiescent", 0)))
        scheme = ComponentScheme(tuple(offs), tuple(dims), tuple(qs))
        if scheme.cell_dim != cell.dim:
            raise DescriptorError("evolution.factors: factor dims multiply to %d,"
                                  " cell.dim is %d" % (scheme.cell_dim, cell.dim))
        if set(scheme.offsets) != set(nb.offsets):
            raise DescriptorError("evolution.factors: factor offsets must equal"
                                  " the neighborhood")
        F = _parse_matrix(ev_node["collision"], "evolution.collision")
        if F.shape[0] != cell.dim:
            raise DescriptorError("evolution.collision: wrong dimension")
        if _unitary_residual(F) > 1e-9 * cell.dim:
            raise DescriptorError("evolution.collision: not unitary")
        qhat = scheme.quiescent_cell_index
        if np.linalg.norm(F[:, qhat] - np.eye(cell.dim)[:, qhat]) > 1e-9:
            raise DescriptorError("evolution.collision: F does not fix the"
                                  " quiescent component tensor")
        S = None
        if ev_node.get("isomorphism") is not None:
            S = _parse_matrix(ev_node["isomorphism"], "evolution.isomorphism")
            if S.shape[0] != cell.dim:
                raise DescriptorError("evolution.isomorphism: wrong dimension")
            if _unitary_residual(S) > 1e-9 * cell.dim:
                raise DescriptorError("evolution.isomorphism: not unitary")
            # the isomorphism must carry the quiescent cell to the quiescent
            # component tensor (up to phase), or the vacuum is not preserved
            if abs(abs(S[qhat, cell.quiescent_index]) - 1.0) > 1e-9 * cell.dim:
                raise DescriptorError("evolution.isomorphism: does not map the"
                                      " quiescent cell to the quiescent"
                                      " component tensor")
        elif qhat != cell.quiescent_index:
            raise DescriptorError("evolution.factors: quiescent components do"
                                  " not combine to cell.quiescent")
        evolution = QlgaEvolution(scheme, F, S)
    else:
        raise DescriptorError("evolution.type: unknown type %r" % kind)

    return QcaDescriptor(n, cell, nb, evolution, source=doc)


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def content_hash(d: QcaDescriptor) -> str:
    return hashlib.sha256(canonical_json(d.source).encode()).hexdigest()


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(e.real), float(e.imag)] for e in row] for row in np.asarray(m, dtype=complex)]


# ---------------------------------------------------------------------------
# dense ring assembly


def window_period(d: QcaDescriptor) -> tuple:
    """Per-axis periodicity of the evolution: ring lengths must be multiples
    of every partitioned layer's stride."""
    if d.kind != "circuit":
        return (1,) * d.n
    period = [1] * d.n
    for lay in d.evolution.layers:
        if lay.mode == "partitioned" and lay.stride:
            for a, s in enumerate(lay.stride):
                period[a] = math.lcm(period[a], int(s))
    return tuple(period)


def _layer_sites(lengths: tuple, stride: tuple | None):
    ranges = [range(0, L, (stride[a] if stride else 1)) for a, L in enumerate(lengths)]
    return itertools.product(*ranges)


def apply_layers_to_columns(d: QcaDescriptor, lengths: tuple, A: np.ndarray) -> np.ndarray:
    """Apply the ring evolution to the output index of A (shape (D, k))."""
    subdims = cell_subdims(d)
    window = RingWindow(d.n, lengths, d.cell)
    slots = window_slots(window, subdims)
    index = {s: i for i, s in enumerate(slots)}
    dims = tuple(subdims[comp] for _, comp in slots)
    k = A.shape[1]
    t = A.reshape(dims + (k,))
    for layer in dense_layers(d):
        if isinstance(layer, GateLayer):
            for site in _layer_sites(lengths, layer.stride):
                inst = [(window.reduce(tuple(s + c for s, c in zip(site, cell))), comp)
                        for cell, comp in layer.rel_slots]
                if len(set(inst)) != len(inst):
                    raise LatticeError("gate support collides on this window")
                op = local_operator(inst, layer.slot_dims, layer.matrix)
                axes = [index[s] for s in op.support]
                t = apply_matrix_to_axes(t, op.matrix, axes, dims)
        elif isinstance(layer, ShiftLayer):
            axes = []
            for cell, comp in slots:
                if comp == layer.comp:
                    src = window.reduce(tuple(c + o for c, o in zip(cell, layer.offset)))
                    axes.append(index[(src, comp)])
                else:
                    axes.append(index[(cell, comp)])
            t = t.transpose(axes + [len(slots)])
        elif isinstance(layer, SigmaLayer):
            axes = sigma_axis_order(window, layer.scheme)
            t = t.transpose(axes + [len(slots)])
        elif isinstance(layer, CellwiseLayer):
            m_comp = len(subdims)
            for cell in window.cells():
                axes = [index[(cell, c)] for c in range(m_comp)]
                t = apply_matrix_to_axes(t, layer.matrix, axes, dims)
    D = A.shape[0]
    return t.reshape(D, k)


def ring_quiescent_index(d: QcaDescriptor, lengths: tuple) -> int:
    subdims = cell_subdims(d)
    qc = quiescent_components(d)
    num_cells = math.prod(lengths)
    idx = 0
    for _ in range(num_cells):
        for dd, q in zip(subdims, qc):
            idx = idx * dd + q
    return idx


def build_window_unitary(d: QcaDescriptor, lengths, cap: int = DENSE_CAP,
                         tol: float = 1e-9):
    """Assemble the evolution on a periodic window as a dense matrix.

    Returns (U, quiescent eigenvalue); U is already divided by the eigenvalue
    so the all-quiescent configuration is fixed exactly.
    """
    lengths = tuple(int(L) for L in lengths)
    if any(L % p for L, p in zip(lengths, window_period(d))):
        raise LatticeError("window lengths %r are not multiples of the"
                           " sublattice period %r" % (lengths, window_period(d)))
    window = RingWindow(d.n, lengths, d.cell)
    window.check_no_wrap(d.neighborhood)
    D = d.cell.dim ** window.num_cells
    if D > cap:
        raise CapExceededError(
            "ring dimension %d exceeds the dense cap %d; use local conjugation"
            % (D, cap))
    U = apply_layers_to_columns(d, lengths, np.eye(D, dtype=complex))
    qi = ring_quiescent_index(d, lengths)
    col = U[:, qi]
    lam = col[qi]
    if abs(abs(lam) - 1.0) > 100 * tol or np.linalg.norm(col - lam * np.eye(D)[:, qi]) > 100 * tol:
        raise NumericalError("all-quiescent configuration is not an eigenvector"
                             " of the assembled ring evolution")
    return U / lam, complex(lam)


def cyclic_shift_permutation(d: QcaDescriptor, lengths: tuple, axis: int = 0) -> np.ndarray:
    """Flat-index permutation of the one-cell cyclic shift along an axis:
    new[i] = old[perm[i]]."""
    subdims = cell_subdims(d)
    window = RingWindow(d.n, lengths, d.cell)
    slots = window_slots(window, subdims)
    index = {s: i for i, s in enumerate(slots)}
    dims = tuple(subdims[comp] for _, comp in slots)
    axes = []
    for cell, comp in slots:
        src = list(cell)
        src[axis] = (src[axis] + 1) % lengths[axis]
        axes.append(index[(tuple(src), comp)])
    D = math.prod(dims)
    return np.arange(D).reshape(dims).transpose(axes).reshape(D)
