"""Tensor factorization of a cell space from commuting self-adjoint algebras.

Given pairwise commuting self-adjoint identity-containing subalgebras of
End(W) whose products span all of End(W), there is a unitary S : W -> ⊗ V_y
carrying the y-th algebra onto End(V_y) ⊗ I.  The construction peels one
factor at a time with a single-isotypic split: a generic Hermitian element
of the remaining product algebra T and of its commutant yield rank-one
"corner" projections whose common range seeds a product basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .descriptor import NumericalError
from .opspace import OperatorSubspace, commutant, intersect, span_product

DEFAULT_SEED = 42
MAX_RESAMPLE = 32


class NotSingleIsotypic(NumericalError):
    pass


@dataclass(frozen=True)
class IsotypicSplit:
    algebra: OperatorSubspace
    multiplicity_basis: np.ndarray = field(repr=False)   # columns span U
    irreducible_basis: np.ndarray = field(repr=False)    # columns span Y
    change_of_basis: np.ndarray = field(repr=False)      # unitary W -> U ⊗ Y
    residuals: dict = field(default_factory=dict)

    @property
    def dim_u(self) -> int:
        return self.multiplicity_basis.shape[1]

    @property
    def dim_y(self) -> int:
        return self.irreducible_basis.shape[1]


@dataclass(frozen=True)
class TensorFactorization:
    offsets: tuple
    factor_dims: dict
    S: np.ndarray = field(repr=False)     # unitary d_W x d_W, W -> ⊗ V_y
    residuals: dict = field(default_factory=dict)

    def dims_tuple(self) -> tuple:
        return tuple(self.factor_dims[y] for y in self.offsets)


def _hermitian_spanning(basis: np.ndarray) -> np.ndarray:
    herm = []
    for b in basis:
        herm.append((b + b.conj().T) / 2)
        herm.append((b - b.conj().T) / 2j)
    return np.stack(herm)


def _cluster(eigvals: np.ndarray, gap: float) -> list:
    """Group sorted eigenvalues into clusters separated by gaps > gap."""
    groups = [[0]]
    for i in range(1, len(eigvals)):
        if eigvals[i] - eigvals[i - 1] > gap:
            groups.append([i])
        else:
            groups[-1].append(i)
    return groups


def _orthonormal_orbit(vectors: list, anchor: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of span(vectors) with the anchor as first element
    (modified Gram-Schmidt, deterministic order)."""
    basis = [anchor / np.linalg.norm(anchor)]
    for v in vectors:
        w = v.copy()
        for b in basis:
            w -= np.vdot(b, w) * b
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            basis.append(w / nrm)
    return np.stack(basis, axis=1)


def single_isotypic_split(T: OperatorSubspace, seed: int = DEFAULT_SEED,
                          tol: float = 1e-9) -> IsotypicSplit:
    """Split W ≅ U ⊗ Y with T ≅ I_U ⊗ End(Y) and Comm(T) ≅ End(U) ⊗ I_Y."""
    d = T.ambient_dim
    comm = commutant(T)
    center = intersect(T, comm)
    if center.dim > 1:
        raise NotSingleIsotypic(
            "algebra has a %d-dimensional center; module is not single-isotypic"
            % center.dim)
    herm_t = _hermitian_spanning(T.basis)
    herm_c = _hermitian_spanning(comm.basis)
    rng = np.random.default_rng(seed)
    last_err = "no attempt"
    for _ in range(MAX_RESAMPLE):
        t = np.tensordot(rng.standard_normal(len(herm_t)), herm_t, axes=(0, 0))
        s = np.tensordot(rng.standard_normal(len(herm_c)), herm_c, axes=(0, 0))
        wt, vt = np.linalg.eigh(t)
        ws, vs = np.linalg.eigh(s)
        gap = 10 * tol * max(1.0, float(np.abs(wt).max()), float(np.abs(ws).max()))
        ct = _cluster(wt, gap)
        cs = _cluster(ws, gap)
        sizes_t = {len(g) for g in ct}
        sizes_s = {len(g) for g in cs}
        if len(sizes_t) != 1 or len(sizes_s) != 1:
            last_err = "unequal eigenvalue cluster sizes"
            continue
        dim_u, dim_y = sizes_t.pop(), sizes_s.pop()
        if dim_u * dim_y != d or len(ct) != dim_y or len(cs) != dim_u:
            last_err = "cluster counts inconsistent with a product structure"
            continue
        p1 = vt[:, ct[0]] @ vt[:, ct[0]].conj().T   # I_U ⊗ |y1><y1|
        q1 = vs[:, cs[0]] @ vs[:, cs[0]].conj().T   # |u1><u1| ⊗ I_Y
        corner = p1 @ q1
        uu, sv, _ = np.linalg.svd(corner)
        if sv[0] < 1e-8 or (len(sv) > 1 and sv[1] > 1e-6 * sv[0]):
            last_err = "corner projection is not rank one"
            continue
        w = uu[:, 0]
        y_vecs = _orthonormal_orbit([b @ w for b in T.basis], w, tol)
        u_vecs = _orthonormal_orbit([b @ w for b in comm.basis], w, tol)
        if y_vecs.shape[1] != dim_y or u_vecs.shape[1] != dim_u:
            last_err = "orbit dimensions disagree with cluster counts"
            continue
        # operators of Comm(T) mapping w to each u_alpha, applied to the
        # y-orbit, give the full product basis w_{alpha,beta} = u_a ⊗ y_b
        k_mat = np.stack([b @ w for b in comm.basis], axis=1)   # d x k
        change = np.zeros((d, d), dtype=complex)
        ok = True
        for alpha in range(dim_u):
            coeff, *_ = np.linalg.lstsq(k_mat, u_vecs[:, alpha], rcond=None)
            b_alpha = np.tensordot(coeff, comm.basis, axes=(0, 0))
            for beta in range(dim_y):
                vec = b_alpha @ y_vecs[:, beta]
                nrm = np.linalg.norm(vec)
                if abs(nrm - 1.0) > 1e-6:
                    ok = False
                    break
                change[alpha * dim_y + beta, :] = vec.conj()
            if not ok:
                break
        if not ok:
            last_err = "product basis vectors not normalized"
            continue
        # polar cleanup: nearest unitary to the assembled change of basis
        uu2, _, vh2 = np.linalg.svd(change)
        change = uu2 @ vh2
        res_t = _factor_residual(T.basis, change, dim_u, dim_y, side="right")
        res_c = _factor_residual(comm.basis, change, dim_u, dim_y, side="left")
        if max(res_t, res_c) > 1e-7 * d:
            last_err = "conjugation residual %.2e too large" % max(res_t, res_c)
            continue
        return IsotypicSplit(
            algebra=T,
            multiplicity_basis=u_vecs,
            irreducible_basis=y_vecs,
            change_of_basis=change,
            residuals={"algebra_side": res_t, "commutant_side": res_c},
        )
    raise NumericalError("single-isotypic split failed after %d attempts: %s"
                         % (MAX_RESAMPLE, last_err))


def _factor_residual(basis, change, dim_u, dim_y, side: str) -> float:
    """Distance of conjugated basis elements from I ⊗ End(Y) (side='right')
    or End(U) ⊗ I (side='left') in the U ⊗ Y ordering."""
    worst = 0.0
    for b in basis:
        m = change @ b @ change.conj().T
        t = m.reshape(dim_u, dim_y, dim_u, dim_y)
        if side == "right":
            avg = np.einsum("aybz->yz", t) / dim_u
            ideal = np.einsum("ac,yz->aycz", np.eye(dim_u), avg)
        else:
            avg = np.einsum("aybz->ab", t) / dim_y
            ideal = np.einsum("ab,yz->aybz", avg, np.eye(dim_y))
        worst = max(worst, float(np.linalg.norm(t - ideal)))
    return worst


def _restrict_to_block(basis: np.ndarray, change: np.ndarray, dim_u: int,
                       dim_y: int) -> np.ndarray:
    """Extract the Y-block of operators of the form I_U ⊗ X after the split."""
    out = []
    for b in basis:
        m = change @ b @ change.conj().T
        t = m.reshape(dim_u, dim_y, dim_u, dim_y)
        out.append(np.einsum("aybz->yz", t) / dim_u)
    return np.stack(out)


def tensor_factorize(algebras: dict, w_dim: int, seed: int = DEFAULT_SEED,
                     tol: float = 1e-9) -> TensorFactorization:
    """Factor W so that the algebra at each offset acts on its own slot.

    ``algebras`` maps offsets to OperatorSubspaces on a shared cell ambient;
    peeling follows the sorted offset order, so factor i of the output is
    bound to the i-th offset.
    """
    offsets = tuple(sorted(algebras))
    full = span_product([algebras[y] for y in offsets])
    if full.dim != w_dim * w_dim:
        raise NumericalError(
            "span of algebra products has dimension %d, expected %d"
            % (full.dim, w_dim * w_dim))

    S = np.eye(w_dim, dtype=complex)
    done_dim = 1
    cur_dim = w_dim
    cur = {y: algebras[y].basis for y in offsets}
    factor_dims = {}
    residuals = {}
    for i, y in enumerate(offsets):
        rest = [cur[z] for z in offsets[i + 1:]]
        if not rest:
            # last factor: whatever is left is its slot
            factor_dims[y] = cur_dim
            residuals[y] = 0.0
            break
        slot = tuple(((0,), j) for j in range(1))  # dummy single-slot ambient
        rest_spaces = [OperatorSubspace(slot, (cur_dim,), b, tol) for b in rest]
        T = span_product(rest_spaces)
        split = single_isotypic_split(T, seed=seed, tol=tol)
        du, dy = split.dim_u, split.dim_y
        factor_dims[y] = du
        residuals[y] = max(split.residuals.values())
        # verify the peeled algebra really lives on the U factor
        own = OperatorSubspace(slot, (cur_dim,), cur[y], tol)
        res_own = _factor_residual(own.basis, split.change_of_basis, du, dy,
                                   side="left")
        residuals[y] = max(residuals[y], res_own)
        S = np.kron(np.eye(done_dim, dtype=complex), split.change_of_basis) @ S
        done_dim *= du
        cur_dim = dy
        cur = {z: _restrict_to_block(cur[z], split.change_of_basis, du, dy)
               for z in offsets[i + 1:]}
    if math.prod(factor_dims.values()) != w_dim:
        raise NumericalError("factor dimensions do not multiply to the cell size")
    return TensorFactorization(offsets, factor_dims, S, residuals)


def verify_factorization(f: TensorFactorization, algebras: dict,
                         tol: float = 1e-9) -> dict:
    """Residuals of S M_y S† against End(V_y) ⊗ I for every offset, plus the
    unitarity defect of S."""
    dims = f.dims_tuple()
    w_dim = math.prod(dims)
    out = {"unitarity": float(np.linalg.norm(
        f.S.conj().T @ f.S - np.eye(w_dim)))}
    for i, y in enumerate(f.offsets):
        d_left = math.prod(dims[:i]) if i else 1
        d_here = dims[i]
        d_right = math.prod(dims[i + 1:]) if i + 1 < len(dims) else 1
        worst = 0.0
        for b in algebras[y].basis:
            m = f.S @ b @ f.S.conj().T
            t = m.reshape(d_left, d_here, d_right, d_left, d_here, d_right)
            # project onto I ⊗ End(V_y) ⊗ I
            avg = np.einsum("aybazb->yz", t) / (d_left * d_right)
            ideal = np.einsum("ac,yz,bd->aybczd",
                              np.eye(d_left), avg, np.eye(d_right))
            worst = max(worst, float(np.linalg.norm(t - ideal)))
        out["offset_%s" % (y,)] = worst
    return out
