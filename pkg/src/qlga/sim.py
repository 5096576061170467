"""State evolution for explicit lattice-gas automata on finite configurations.

A configuration stores amplitudes on a finite box and is implicitly the
quiescent product state everywhere outside it.  One step pads the box by the
propagation radius, relays components between cells, applies the collision
cell by cell, and trims exactly-quiescent boundary layers so the stored box
tracks the excitation's light cone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .descriptor import QcaDescriptor, cell_subdims, quiescent_components
from .lattice import apply_matrix_to_axes

TRIM_TOL = 1e-13


class SimulationError(ValueError):
    pass


@dataclass
class ConfigState:
    """Amplitudes over a finite box of cells; quiescent product outside.

    ``tensor`` has one axis of size cell-dim per cell, arranged as an
    ``extent``-shaped grid flattened cell-by-cell: axis k corresponds to the
    cell at ``origin + unravel(k, extent)``.
    """

    origin: tuple
    extent: tuple
    cell_dims: tuple
    quiescent: tuple                       # per-component quiescent indices
    tensor: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.extent)

    @property
    def cell_dim(self) -> int:
        return math.prod(self.cell_dims)

    @property
    def num_cells(self) -> int:
        return math.prod(self.extent)

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensor))

    def cells(self):
        for k in range(self.num_cells):
            idx = np.unravel_index(k, self.extent)
            yield tuple(o + i for o, i in zip(self.origin, idx))

    def amplitudes(self) -> np.ndarray:
        """Flat amplitude vector over the box, cells in grid order."""
        return self.tensor.reshape(-1)

    def copy(self) -> "ConfigState":
        return ConfigState(self.origin, self.extent, self.cell_dims,
                           self.quiescent, self.tensor.copy())


def quiescent_cell_index(cell_dims: tuple, quiescent: tuple) -> int:
    idx = 0
    for d, q in zip(cell_dims, quiescent):
        idx = idx * d + q
    return idx


def from_cells(cells: dict, d: QcaDescriptor) -> ConfigState:
    """Build a product configuration from {cell: amplitude vector or index}."""
    subdims = cell_subdims(d)
    dW = math.prod(subdims)
    qc = quiescent_components(d)
    if not cells:
        raise SimulationError("need at least one explicit cell")
    keys = [tuple(k) for k in cells]
    origin = tuple(min(k[a] for k in keys) for a in range(d.n))
    top = tuple(max(k[a] for k in keys) for a in range(d.n))
    extent = tuple(t - o + 1 for o, t in zip(origin, top))
    q_idx = quiescent_cell_index(subdims, qc)
    vecs = []
    for cell_idx in range(math.prod(extent)):
        pos = np.unravel_index(cell_idx, extent)
        cell = tuple(o + p for o, p in zip(origin, pos))
        val = cells.get(cell)
        v = np.zeros(dW, dtype=complex)
        if val is None:
            v[q_idx] = 1.0
        elif np.isscalar(val):
            v[int(val)] = 1.0
        else:
            v[:] = np.asarray(val, dtype=complex)
            nrm = np.linalg.norm(v)
            if nrm == 0:
                raise SimulationError("zero amplitude vector at %r" % (cell,))
            v /= nrm
        vecs.append(v)
    t = vecs[0]
    for v in vecs[1:]:
        t = np.multiply.outer(t, v)
    return ConfigState(origin, extent, subdims, qc,
                       t.reshape((dW,) * math.prod(extent)))


def _pad(state: ConfigState, margin: int) -> ConfigState:
    """Enlarge the box by ``margin`` quiescent layers on every side."""
    if margin == 0:
        return state
    dW = state.cell_dim
    q_idx = quiescent_cell_index(state.cell_dims, state.quiescent)
    new_extent = tuple(e + 2 * margin for e in state.extent)
    new_origin = tuple(o - margin for o in state.origin)
    new_num = math.prod(new_extent)
    full = np.zeros((dW,) * new_num, dtype=complex)
    # grid (lexicographic) order of the retained cells is unchanged by the
    # uniform shift, so one sliced assignment places the old tensor
    index = []
    for k in range(new_num):
        pos = np.unravel_index(k, new_extent)
        inside = all(margin <= p < margin + e
                     for p, e in zip(pos, state.extent))
        index.append(slice(None) if inside else q_idx)
    full[tuple(index)] = state.tensor
    return ConfigState(new_origin, new_extent, state.cell_dims,
                       state.quiescent, full)


def _trim(state: ConfigState) -> ConfigState:
    """Drop boundary layers whose cells are exactly quiescent."""
    q_idx = quiescent_cell_index(state.cell_dims, state.quiescent)
    extent = list(state.extent)
    origin = list(state.origin)
    t = state.tensor
    dW = state.cell_dim
    others = [i for i in range(dW) if i != q_idx]

    def boundary_axes(axis: int, first: bool) -> list:
        edge = 0 if first else extent[axis] - 1
        out = []
        for k in range(math.prod(extent)):
            pos = np.unravel_index(k, tuple(extent))
            if pos[axis] == edge:
                out.append(k)
        return out

    changed = True
    while changed:
        changed = False
        for axis in range(len(extent)):
            for first in (True, False):
                if extent[axis] <= 1:
                    continue
                layer = boundary_axes(axis, first)
                mass = sum(float(np.linalg.norm(np.take(t, others, axis=k))) ** 2
                           for k in layer)
                if mass >= TRIM_TOL ** 2:
                    continue
                index = [q_idx if k in layer else slice(None)
                         for k in range(t.ndim)]
                t = t[tuple(index)]
                extent[axis] -= 1
                if first:
                    origin[axis] += 1
                changed = True
    return ConfigState(tuple(origin), tuple(extent), state.cell_dims,
                       state.quiescent, t)


def step(state: ConfigState, d: QcaDescriptor, trim: bool = True) -> ConfigState:
    """One automaton step.  Only lattice-gas descriptors are supported."""
    if d.kind != "qlga":
        raise SimulationError("simulation requires an explicit lattice-gas"
                              " descriptor; decompose first")
    ev = d.evolution
    scheme = ev.scheme
    r = max((max(abs(c) for c in z) for z in scheme.offsets), default=0)
    state = _pad(state, r)
    dims = scheme.factor_dims
    m = len(dims)
    dW = math.prod(dims)
    num_cells = state.num_cells
    # component-resolved view: one axis per (cell, component)
    comp_dims = tuple(dims[c] for _ in range(num_cells) for c in range(m))
    t = state.tensor.reshape(comp_dims)
    cell_of = {}
    for k, cell in enumerate(state.cells()):
        cell_of[cell] = k

    def axis_of(cell, comp):
        return cell_of[cell] * m + comp

    if ev.isomorphism is not None:
        t = t.reshape((dW,) * num_cells)
        for k in range(num_cells):
            t = apply_matrix_to_axes(t, ev.isomorphism, [k], (dW,) * num_cells)
        t = t.reshape(comp_dims)
    # propagation: component z of cell x+z moves to component z of cell x.
    # The padded boundary ring is exactly quiescent, so treating the pull
    # from outside the box as a cyclic wrap is exact.
    axes = []
    for k, cell in enumerate(state.cells()):
        for c, z in enumerate(scheme.offsets):
            src = tuple(o + (cc - oo + zz) % e
                        for o, cc, zz, oo, e in zip(state.origin, cell, z,
                                                    state.origin, state.extent))
            axes.append(axis_of(src, c))
    t = t.transpose(axes)
    t = t.reshape((dW,) * num_cells)
    for k in range(num_cells):
        t = apply_matrix_to_axes(t, ev.collision, [k], (dW,) * num_cells)
    if ev.isomorphism is not None:
        for k in range(num_cells):
            t = apply_matrix_to_axes(t, ev.isomorphism.conj().T, [k],
                                     (dW,) * num_cells)
    out = ConfigState(state.origin, state.extent, state.cell_dims,
                      state.quiescent, t)
    return _trim(out) if trim else out


def run(state: ConfigState, d: QcaDescriptor, steps: int,
        trim: bool = True) -> ConfigState:
    for _ in range(steps):
        state = step(state, d, trim=trim)
    return state


def observe(state: ConfigState) -> dict:
    """Per-cell occupation probabilities (diagonal of the cell marginals)."""
    dW = state.cell_dim
    t = state.tensor
    out = {}
    for k, cell in enumerate(state.cells()):
        moved = np.moveaxis(t, k, 0).reshape(dW, -1)
        probs = np.sum(np.abs(moved) ** 2, axis=1)
        out[cell] = probs
    return out


def state_to_json(state: ConfigState) -> dict:
    flat = state.amplitudes()
    return {
        "origin": list(state.origin),
        "extent": list(state.extent),
        "cell_dims": list(state.cell_dims),
        "quiescent": list(state.quiescent),
        "amplitudes": [[float(a.real), float(a.imag)] for a in flat],
    }


def state_from_json(doc) -> ConfigState:
    if isinstance(doc, str):
        doc = json.loads(doc)
    origin = tuple(int(c) for c in doc["origin"])
    extent = tuple(int(c) for c in doc["extent"])
    cell_dims = tuple(int(c) for c in doc["cell_dims"])
    quiescent = tuple(int(c) for c in doc["quiescent"])
    amp = np.array([complex(a[0], a[1]) for a in doc["amplitudes"]])
    dW = math.prod(cell_dims)
    num = math.prod(extent)
    if amp.size != dW ** num:
        raise SimulationError("amplitude count does not match the box")
    return ConfigState(origin, extent, cell_dims, quiescent,
                       amp.reshape((dW,) * num))
