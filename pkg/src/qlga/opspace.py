"""Hilbert-Schmidt geometry for finite operator subspaces.

All subspace arithmetic happens through Gram matrices of explicit bases; a
subspace is stored as an orthonormal stack of dense matrices on a shared
ambient support.  Rank decisions use singular values relative to the largest
one, with the convention that a value exactly at the cutoff counts as
nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import LocalOperator, embed, union_support

DEFAULT_TOL = 1e-9


class OpspaceError(ValueError):
    pass


def hs_inner(a: LocalOperator, b: LocalOperator) -> complex:
    """tr(a† b) over the union support; identity padding contributes
    multiplicative dimension factors through the trace."""
    support, dims = union_support(a, b)
    ae = embed(a, support, dims)
    be = embed(b, support, dims)
    return complex(np.vdot(ae.matrix, be.matrix))


@dataclass(frozen=True)
class OperatorSubspace:
    """Orthonormal basis of an operator subspace on a fixed ambient support."""

    support: tuple
    dims: tuple
    basis: np.ndarray = field(repr=False)  # shape (k, D, D)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        D = math.prod(self.dims) if self.dims else 1
        if self.basis.ndim != 3 or self.basis.shape[1:] != (D, D):
            raise OpspaceError("basis shape %r does not match ambient dim %d"
                               % (self.basis.shape, D))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return math.prod(self.dims) if self.dims else 1

    def operators(self) -> list:
        return [LocalOperator(self.support, self.dims, m) for m in self.basis]

    def flat(self) -> np.ndarray:
        return self.basis.reshape(self.dim, -1)

    def project_coeffs(self, matrix: np.ndarray) -> np.ndarray:
        """Expansion coefficients of the orthogonal projection of ``matrix``."""
        return self.flat().conj() @ matrix.reshape(-1)

    def contains(self, matrix: np.ndarray, tol: float | None = None) -> bool:
        c = self.project_coeffs(matrix)
        proj = (c @ self.flat()).reshape(matrix.shape)
        scale = max(np.linalg.norm(matrix), 1.0)
        return np.linalg.norm(proj - matrix) <= (tol or self.tol * 100) * scale

    def projector_distance(self, other: "OperatorSubspace") -> float:
        """Frobenius distance of the two span projectors (via Gram data)."""
        if self.dims != other.dims:
            raise OpspaceError("ambient mismatch")
        c = self.flat().conj() @ other.flat().T  # k1 x k2 overlap matrix
        # ||P1 - P2||_F^2 = k1 + k2 - 2 tr(P1 P2), tr(P1 P2) = ||C||_F^2
        val = self.dim + other.dim - 2 * np.linalg.norm(c) ** 2
        return math.sqrt(max(val, 0.0))


def _common_ambient(generators):
    merged = {}
    for g in generators:
        for s, d in zip(g.support, g.dims):
            if merged.setdefault(s, d) != d:
                raise OpspaceError("slot dimension mismatch at %r" % (s,))
    support = tuple(sorted(merged))
    return support, tuple(merged[s] for s in support)


def orthonormalize(generators, tol: float = DEFAULT_TOL) -> OperatorSubspace:
    """Orthonormal basis of the span of the generators (SVD row reduction)."""
    if not generators:
        return OperatorSubspace((), (), np.zeros((0, 1, 1), dtype=complex), tol)
    support, dims = _common_ambient(generators)
    D = math.prod(dims) if dims else 1
    rows = np.stack([embed(g, support, dims).matrix.reshape(-1) for g in generators])
    return _from_rows(rows, support, dims, D, tol)


def _from_rows(rows: np.ndarray, support, dims, D, tol) -> OperatorSubspace:
    if rows.shape[0] == 0:
        return OperatorSubspace(support, dims, np.zeros((0, D, D), dtype=complex), tol)
    u, s, vh = np.linalg.svd(rows, full_matrices=False)
    if s.size and s[0] > 0:
        rank = int(np.sum(s >= tol * s[0]))  # a value exactly at tol is nonzero
    else:
        rank = 0
    basis = vh[:rank].reshape(rank, D, D)
    return OperatorSubspace(support, dims, basis, tol)


def _aligned(s1: OperatorSubspace, s2: OperatorSubspace):
    """Embed both subspaces on the union ambient support."""
    if s1.support == s2.support and s1.dims == s2.dims:
        return s1, s2
    merged = dict(zip(s1.support, s1.dims))
    for s, d in zip(s2.support, s2.dims):
        if merged.setdefault(s, d) != d:
            raise OpspaceError("slot dimension mismatch at %r" % (s,))
    support = tuple(sorted(merged))
    dims = tuple(merged[s] for s in support)

    def lift(sub):
        if sub.support == support:
            return sub
        ops = [embed(op, support, dims) for op in sub.operators()]
        mats = np.stack([o.matrix for o in ops]) if ops else np.zeros(
            (0, math.prod(dims), math.prod(dims)), dtype=complex)
        # identity padding scales HS norms by the padded dimension factor
        extra = math.prod(d for s, d in zip(support, dims) if s not in set(sub.support))
        return OperatorSubspace(support, dims, mats / math.sqrt(extra), sub.tol)

    return lift(s1), lift(s2)


def intersect(s1: OperatorSubspace, s2: OperatorSubspace) -> OperatorSubspace:
    """Span intersection via Gram data: null directions of (I - P_{s2})
    restricted to s1's coordinates."""
    a, b = _aligned(s1, s2)
    tol = min(a.tol, b.tol)
    if a.dim == 0 or b.dim == 0:
        D = a.ambient_dim
        return OperatorSubspace(a.support, a.dims, np.zeros((0, D, D), dtype=complex), tol)
    c = a.flat().conj() @ b.flat().T           # overlap matrix, k1 x k2
    g = np.eye(a.dim) - c @ c.conj().T         # (I - P2) in s1 coordinates
    w, v = np.linalg.eigh(g)
    cut = max(100 * tol, 1e-12)
    coeffs = v[:, w < cut].T
    mats = np.tensordot(coeffs, a.basis, axes=(1, 0))
    if mats.shape[0] == 0:
        D = a.ambient_dim
        return OperatorSubspace(a.support, a.dims, np.zeros((0, D, D), dtype=complex), tol)
    return OperatorSubspace(a.support, a.dims, mats, tol)


def _span_rows(rows, D, tol):
    u, s, vh = np.linalg.svd(rows, full_matrices=False)
    rank = int(np.sum(s >= tol * s[0])) if s.size and s[0] > 0 else 0
    return vh[:rank]


def algebra_closure(generators, include_identity: bool = True,
                    tol: float = DEFAULT_TOL) -> OperatorSubspace:
    """Smallest subspace containing the generators that is closed under
    adjoints and products (and the identity, if flagged)."""
    if not generators:
        if not include_identity:
            return orthonormalize([], tol)
        raise OpspaceError("cannot build identity algebra without an ambient")
    support, dims = _common_ambient(generators)
    D = math.prod(dims) if dims else 1
    mats = [embed(g, support, dims).matrix for g in generators]
    mats += [m.conj().T for m in mats]
    if include_identity:
        mats.append(np.eye(D, dtype=complex))
    rows = _span_rows(np.stack([m.reshape(-1) for m in mats]), D, tol)
    while True:
        basis = rows.reshape(-1, D, D)
        prods = np.einsum("aij,bjk->abik", basis, basis).reshape(-1, D * D)
        new = _span_rows(np.concatenate([rows, prods]), D, tol)
        if new.shape[0] == rows.shape[0]:
            return OperatorSubspace(support, dims, basis, tol)
        rows = new


def commutant(s: OperatorSubspace) -> OperatorSubspace:
    """All ambient operators commuting with every basis element of ``s``,
    solved as one stacked linear system [A, b] = 0."""
    D = s.ambient_dim
    eye = np.eye(D)
    blocks = []
    for b in s.basis:
        # row-major vec: vec(Ab) = (I (x) b^T) vec(A), vec(bA) = (b (x) I) vec(A)
        blocks.append(np.kron(eye, b.T) - np.kron(b, eye))
    if not blocks:
        basis = np.eye(D * D, dtype=complex).reshape(D * D, D, D)
        return OperatorSubspace(s.support, s.dims, basis, s.tol)
    m = np.concatenate(blocks)
    u, sv, vh = np.linalg.svd(m)
    # the basis is HS-orthonormal, so genuine non-commutation shows up at
    # scale O(1); an absolute floor keeps all-zero stacks at rank 0
    scale = max(float(sv[0]), 1.0) if sv.size else 1.0
    rank = int(np.sum(sv >= s.tol * scale))
    null = vh[rank:].conj()
    basis = null.reshape(-1, D, D)
    return OperatorSubspace(s.support, s.dims, basis, s.tol)


def span_product(algebras) -> OperatorSubspace:
    """span of products of one element from each algebra, iterated to
    stability.  For commuting identity-containing algebras a single pairwise
    pass iterated suffices."""
    algebras = list(algebras)
    if not algebras:
        raise OpspaceError("span_product needs at least one algebra")
    acc = algebras[0]
    for other in algebras[1:]:
        a, b = _aligned(acc, other)
        D = a.ambient_dim
        prods = np.einsum("aij,bjk->abik", a.basis, b.basis).reshape(-1, D * D)
        tol = min(a.tol, b.tol)
        rows = _span_rows(prods, D, tol)
        acc = OperatorSubspace(a.support, a.dims, rows.reshape(-1, D, D), tol)
    # iterate self-products until the dimension stabilizes
    while True:
        D = acc.ambient_dim
        prods = np.einsum("aij,bjk->abik", acc.basis, acc.basis).reshape(-1, D * D)
        rows = _span_rows(np.concatenate([acc.flat(), prods]), D, acc.tol)
        if rows.shape[0] == acc.dim:
            return acc
        acc = OperatorSubspace(acc.support, acc.dims, rows.reshape(-1, D, D), acc.tol)
