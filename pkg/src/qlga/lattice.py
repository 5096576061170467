"""Cells, neighborhoods, ring windows and operators with explicit finite support.

A *slot* is a pair ``(cell, comp)`` where ``cell`` is a tuple of integer
lattice coordinates and ``comp`` indexes a tensor component inside the cell
(a qubit, or a propagation-direction factor).  Slots carry a fixed total
order -- lexicographic on ``(cell, comp)`` -- which pins down every matrix
layout in the package.

A :class:`LocalOperator` is a dense matrix on an explicit sorted slot list,
understood to act as the identity everywhere else.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

Slot = tuple  # (cell: tuple[int, ...], comp: int)


class LatticeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# structural records


@dataclass(frozen=True)
class CellStructure:
    """Single-cell Hilbert space: dimension and the quiescent basis index."""

    dim: int
    quiescent_index: int = 0
    labels: tuple | None = None

    def __post_init__(self):
        if not (0 <= self.quiescent_index < self.dim):
            raise LatticeError(
                "quiescent index %d out of range for dim %d"
                % (self.quiescent_index, self.dim)
            )


@dataclass(frozen=True)
class Neighborhood:
    """Finite set of integer offset vectors in Z^n."""

    offsets: tuple  # tuple of coordinate tuples, sorted
    n: int

    def __post_init__(self):
        offs = tuple(sorted(tuple(int(c) for c in z) for z in self.offsets))
        if len(set(offs)) != len(offs):
            raise LatticeError("duplicate neighborhood offsets")
        for z in offs:
            if len(z) != self.n:
                raise LatticeError("offset %r has wrong dimension" % (z,))
        object.__setattr__(self, "offsets", offs)

    @property
    def reflected(self) -> tuple:
        """The reflected offset set V = -N."""
        return tuple(sorted(tuple(-c for c in z) for z in self.offsets))

    @property
    def radius(self) -> int:
        return max((max(abs(c) for c in z) for z in self.offsets), default=0)


@dataclass(frozen=True)
class RingWindow:
    """Periodic finite window: per-axis lengths, one CellStructure per cell."""

    n: int
    lengths: tuple
    cell: CellStructure

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(L) for L in self.lengths))
        if len(self.lengths) != self.n or any(L < 1 for L in self.lengths):
            raise LatticeError("bad window lengths %r" % (self.lengths,))

    def check_no_wrap(self, nb: Neighborhood):
        for axis, L in enumerate(self.lengths):
            m = max((abs(z[axis]) for z in nb.offsets), default=0)
            if L <= 2 * m + 1:
                raise LatticeError(
                    "window length %d on axis %d too small for offsets with |z|=%d"
                    % (L, axis, m)
                )

    def cells(self) -> list:
        return [c for c in itertools.product(*(range(L) for L in self.lengths))]

    def reduce(self, cell: tuple) -> tuple:
        return tuple(int(c) % L for c, L in zip(cell, self.lengths))

    @property
    def num_cells(self) -> int:
        return math.prod(self.lengths)


@dataclass(frozen=True)
class ComponentScheme:
    """Per-offset tensor factor dimensions of a cell, in sorted offset order."""

    offsets: tuple                 # sorted coordinate tuples
    factor_dims: tuple             # d_{V_z} aligned with offsets
    quiescent_components: tuple    # per-factor quiescent basis index

    def __post_init__(self):
        offs = tuple(tuple(int(c) for c in z) for z in self.offsets)
        if list(offs) != sorted(offs):
            raise LatticeError("scheme offsets must be sorted")
        if len(offs) != len(self.factor_dims) or len(offs) != len(
            self.quiescent_components
        ):
            raise LatticeError("scheme field lengths disagree")
        for d, q in zip(self.factor_dims, self.quiescent_components):
            if not (0 <= q < d):
                raise LatticeError("quiescent component index out of range")
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "factor_dims", tuple(int(d) for d in self.factor_dims))
        object.__setattr__(
            self, "quiescent_components", tuple(int(q) for q in self.quiescent_components)
        )

    @property
    def cell_dim(self) -> int:
        return math.prod(self.factor_dims)

    @property
    def quiescent_cell_index(self) -> int:
        """Row-major index of the quiescent product state within one cell."""
        idx = 0
        for d, q in zip(self.factor_dims, self.quiescent_components):
            idx = idx * d + q
        return idx


# ---------------------------------------------------------------------------
# local operators


@dataclass(frozen=True)
class LocalOperator:
    support: tuple          # sorted tuple of slots
    dims: tuple             # slot dimensions, aligned with support
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        D = math.prod(self.dims) if self.dims else 1
        if self.matrix.shape != (D, D):
            raise LatticeError(
                "matrix shape %r does not match slot dims %r"
                % (self.matrix.shape, self.dims)
            )
        if list(self.support) != sorted(self.support):
            raise LatticeError("support must be sorted; use local_operator()")
        if len(set(self.support)) != len(self.support):
            raise LatticeError("duplicate slots in support")

    @property
    def dim(self) -> int:
        return math.prod(self.dims) if self.dims else 1

    def cells(self) -> set:
        return {s[0] for s in self.support}


def _reorder_matrix(matrix: np.ndarray, dims: tuple, perm: list) -> np.ndarray:
    """Permute tensor factors of a matrix: factor i of the output is factor
    perm[i] of the input (same permutation on rows and columns)."""
    k = len(dims)
    if k == 0 or perm == list(range(k)):
        return matrix, dims
    new_dims = tuple(dims[p] for p in perm)
    t = matrix.reshape(dims + dims)
    t = t.transpose(list(perm) + [k + p for p in perm])
    D = math.prod(dims)
    return np.ascontiguousarray(t.reshape(D, D)), new_dims


def local_operator(support, dims, matrix) -> LocalOperator:
    """Build a LocalOperator, sorting slots (and matrix factors) as needed."""
    support = [(tuple(c), int(s)) for c, s in support]
    dims = tuple(int(d) for d in dims)
    matrix = np.asarray(matrix, dtype=complex)
    order = sorted(range(len(support)), key=lambda i: support[i])
    if order != list(range(len(support))):
        matrix, dims = _reorder_matrix(matrix, dims, order)
        support = [support[i] for i in order]
    return LocalOperator(tuple(support), tuple(dims), matrix)


def identity_like(op: LocalOperator) -> LocalOperator:
    return LocalOperator(op.support, op.dims, np.eye(op.dim, dtype=complex))


def embed(op: LocalOperator, support, dims) -> LocalOperator:
    """Pad ``op`` with identity factors up to a larger (sorted) support."""
    support = tuple((tuple(c), int(s)) for c, s in support)
    dims = tuple(int(d) for d in dims)
    if list(support) != sorted(support):
        raise LatticeError("target support must be sorted")
    pos = {s: i for i, s in enumerate(support)}
    for s, d in zip(op.support, op.dims):
        if s not in pos:
            raise LatticeError("target support missing slot %r" % (s,))
        if dims[pos[s]] != d:
            raise LatticeError("slot dimension mismatch at %r" % (s,))
    extra = [i for i, s in enumerate(support) if s not in set(op.support)]
    d_extra = math.prod(dims[i] for i in extra) if extra else 1
    big = np.kron(op.matrix, np.eye(d_extra, dtype=complex))
    # factor order of `big` is op.support followed by the extra slots
    interim = list(op.support) + [support[i] for i in extra]
    interim_dims = tuple(op.dims) + tuple(dims[i] for i in extra)
    perm = [interim.index(s) for s in support]
    big, _ = _reorder_matrix(big, interim_dims, perm)
    return LocalOperator(support, dims, big)


def union_support(a: LocalOperator, b: LocalOperator):
    merged = {}
    for s, d in zip(a.support, a.dims):
        merged[s] = d
    for s, d in zip(b.support, b.dims):
        if merged.setdefault(s, d) != d:
            raise LatticeError("slot dimension mismatch at %r" % (s,))
    support = tuple(sorted(merged))
    return support, tuple(merged[s] for s in support)


def multiply(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    support, dims = union_support(a, b)
    ae = embed(a, support, dims)
    be = embed(b, support, dims)
    return LocalOperator(support, dims, ae.matrix @ be.matrix)


def adjoint(a: LocalOperator) -> LocalOperator:
    return LocalOperator(a.support, a.dims, a.matrix.conj().T)


def translate(op: LocalOperator, z) -> LocalOperator:
    """Shift every support cell by the offset vector z (matrix unchanged)."""
    z = tuple(int(c) for c in z)
    support = tuple((tuple(c + dz for c, dz in zip(cell, z)), comp)
                    for cell, comp in op.support)
    # a uniform shift preserves lexicographic slot order
    return LocalOperator(support, op.dims, op.matrix)


def partial_trace(op: LocalOperator, keep) -> LocalOperator:
    """Trace out all slots not in ``keep`` (a subset of the support)."""
    keep = {(tuple(c), int(s)) for c, s in keep}
    if not keep <= set(op.support):
        raise LatticeError("keep set is not a subset of the support")
    k = len(op.support)
    t = op.matrix.reshape(op.dims + op.dims)
    # trace axes from the back so earlier axis indices stay valid
    for i in reversed(range(k)):
        if op.support[i] not in keep:
            t = np.trace(t, axis1=i, axis2=i + (t.ndim // 2))
    new = [(s, d) for s, d in zip(op.support, op.dims) if s in keep]
    dims = tuple(d for _, d in new)
    D = math.prod(dims) if dims else 1
    return LocalOperator(tuple(s for s, _ in new), dims, np.asarray(t).reshape(D, D))


def trim(op: LocalOperator, tol: float = 1e-9) -> LocalOperator:
    """Drop slots on which ``op`` acts as the identity (within tol).

    The orthogonal projection of op onto operators of the form I_s (x) B is
    I_s (x) tr_s(op)/d, so the defect is computable from norms alone:
    ||op - P(op)||² = ||op||² - ||tr_s(op)||²/d.
    """
    drop = []
    k = len(op.support)
    full = op.matrix.reshape(op.dims + op.dims)
    scale = max(float(np.linalg.norm(op.matrix)), 1.0)
    for i, (s, d) in enumerate(zip(op.support, op.dims)):
        keep = [t for t in op.support if t != s]
        rest_dims = tuple(dd for j, dd in enumerate(op.dims) if j != i)
        red = (partial_trace(op, keep).matrix / d).reshape(rest_dims + rest_dims)
        u = np.moveaxis(full, (i, k + i), (0, 1))
        defect2 = 0.0
        for a in range(d):
            for b in range(d):
                blk = u[a, b] - red if a == b else u[a, b]
                defect2 += float(np.linalg.norm(blk)) ** 2
        if defect2 <= (tol * scale) ** 2:
            drop.append(s)
    if not drop:
        return op
    keep = [s for s in op.support if s not in drop]
    d_drop = math.prod(d for s, d in zip(op.support, op.dims) if s in drop)
    out = partial_trace(op, keep)
    return LocalOperator(out.support, out.dims, out.matrix / d_drop)


def support_of(op: LocalOperator, tol: float = 1e-9) -> set:
    """Minimal set of cells outside which ``op`` factors as the identity."""
    return trim(op, tol).cells()


def embed_window(op: LocalOperator, window: RingWindow) -> LocalOperator:
    """Re-express support cells modulo the window lengths."""
    support = []
    for cell, comp in op.support:
        support.append((window.reduce(cell), comp))
    if len(set(support)) != len(support):
        raise LatticeError("support collision after modular reduction")
    return local_operator(support, op.dims, op.matrix)


# ---------------------------------------------------------------------------
# window state indexing and the propagation permutation


def window_slots(window: RingWindow, subdims: tuple) -> list:
    """All (cell, comp) slots of a window in slot order; subdims lists the
    per-component dimensions of one cell."""
    return [((cell, comp)) for cell in window.cells() for comp in range(len(subdims))]


def sigma_permutation(window: RingWindow, scheme: ComponentScheme) -> dict:
    """The propagation bijection on slots: component z of cell x+z moves to
    component z of cell x.  Returns {destination slot: source slot}."""
    out = {}
    for cell in window.cells():
        for i, z in enumerate(scheme.offsets):
            src = window.reduce(tuple(c + dz for c, dz in zip(cell, z)))
            out[(cell, i)] = (src, i)
    return out


def sigma_axis_order(window: RingWindow, scheme: ComponentScheme) -> list:
    """Axis permutation implementing sigma on a state tensor whose axes are
    the window slots in slot order: axes[i] = source axis of destination i."""
    slots = window_slots(window, scheme.factor_dims)
    index = {s: i for i, s in enumerate(slots)}
    perm = sigma_permutation(window, scheme)
    return [index[perm[s]] for s in slots]


def sigma_index_permutation(window: RingWindow, scheme: ComponentScheme) -> np.ndarray:
    """sigma as a permutation of flat state indices: new[i] = old[perm[i]]."""
    dims = tuple(
        scheme.factor_dims[i]
        for _ in window.cells()
        for i in range(len(scheme.factor_dims))
    )
    D = math.prod(dims)
    axes = sigma_axis_order(window, scheme)
    idx = np.arange(D).reshape(dims).transpose(axes).reshape(D)
    return idx


def apply_matrix_to_axes(array: np.ndarray, gate: np.ndarray, axes: list,
                         dims: tuple) -> np.ndarray:
    """Apply ``gate`` to the listed tensor axes of ``array`` (state-side).

    ``array`` has one axis per slot (shape ``dims``) plus optionally trailing
    axes; ``gate`` is square on the product of the listed axis dimensions.
    """
    k = len(axes)
    d_gate = math.prod(dims[a] for a in axes)
    moved = np.moveaxis(array, axes, range(k))
    shape = moved.shape
    flat = moved.reshape(d_gate, -1)
    flat = gate @ flat
    moved = flat.reshape(shape)
    return np.moveaxis(moved, range(k), axes)
