"""Exact symplectic backend for qubit-lattice automata built from Clifford gates.

Pauli words are stored sparsely: sets of (cell, qubit) keys carrying X and Z
bits plus a power of i, with the canonical form  i^p · prod X^x · prod Z^z
(X factors to the left of Z factors on every qubit).  Conjugation by the
supported gate set maps Pauli words to Pauli words, so neighborhood growth
and algebra dimensions come out as exact integers over F2 — no floating
point enters the criterion at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .descriptor import (CliffordEvolution, CliffordGate, QcaDescriptor,
                         quiescent_components)
from .heisenberg import CausalityViolation


@dataclass
class PauliWord:
    """i^phase * prod_k X_k^{x} Z_k^{z} over (cell, qubit) keys."""

    x: set = field(default_factory=set)
    z: set = field(default_factory=set)
    phase: int = 0  # mod 4

    def copy(self) -> "PauliWord":
        return PauliWord(set(self.x), set(self.z), self.phase)

    def keys(self) -> set:
        return self.x | self.z

    def cells(self) -> set:
        return {k[0] for k in self.keys()}

    def __eq__(self, other) -> bool:
        return (self.x == other.x and self.z == other.z
                and self.phase % 4 == other.phase % 4)

    def label(self) -> str:
        parts = []
        for k in sorted(self.keys()):
            p = ("X" if k in self.x else "") + ("Z" if k in self.z else "")
            parts.append("%s%s" % ({"XZ": "XZ"}.get(p, p), list(k)))
        return "i^%d %s" % (self.phase % 4, " ".join(parts) or "I")


def single_pauli(kind: str, key) -> PauliWord:
    """A one-qubit Pauli at the given (cell, qubit) key; Y = i XZ."""
    if kind == "X":
        return PauliWord({key}, set())
    if kind == "Z":
        return PauliWord(set(), {key})
    if kind == "Y":
        return PauliWord({key}, {key}, 1)
    raise ValueError("unknown Pauli kind %r" % kind)


# -- single-gate conjugation rules, acting in place --------------------------
#
# Rules are for U P U† with the word kept in X-before-Z canonical order.
# Reordering after a bit flip costs a factor (-1) for each qubit where both
# an X and Z end up present and their order swapped; that is folded into the
# phase increments below.

def _conj_cnot(w: PauliWord, ctrl, tgt):
    if ctrl in w.x:
        w.x.symmetric_difference_update({tgt})
    if tgt in w.z:
        w.z.symmetric_difference_update({ctrl})


def _conj_cz(w: PauliWord, a, b):
    xa, xb = a in w.x, b in w.x
    if xa:
        w.z.symmetric_difference_update({b})
    if xb:
        w.z.symmetric_difference_update({a})
    if xa and xb:
        w.phase = (w.phase + 2) % 4


def _conj_h(w: PauliWord, q):
    xq, zq = q in w.x, q in w.z
    if xq and zq:
        w.phase = (w.phase + 2) % 4
    elif xq:
        w.x.discard(q)
        w.z.add(q)
    elif zq:
        w.z.discard(q)
        w.x.add(q)


def _conj_s(w: PauliWord, q):
    # S X S† = Y = i XZ, S Z S† = Z
    if q in w.x:
        w.z.symmetric_difference_update({q})
        w.phase = (w.phase + 1) % 4


def _conj_sdg(w: PauliWord, q):
    if q in w.x:
        w.z.symmetric_difference_update({q})
        w.phase = (w.phase + 3) % 4


def _conj_x(w: PauliWord, q):
    if q in w.z:
        w.phase = (w.phase + 2) % 4


def _conj_z(w: PauliWord, q):
    if q in w.x:
        w.phase = (w.phase + 2) % 4


_FORWARD = {"CNOT": _conj_cnot, "CZ": _conj_cz, "H": _conj_h,
            "S": _conj_sdg, "X": _conj_x, "Z": _conj_z}
_BACKWARD = {"CNOT": _conj_cnot, "CZ": _conj_cz, "H": _conj_h,
             "S": _conj_s, "X": _conj_x, "Z": _conj_z}


def _relabel_keys(w: PauliWord, fn):
    w.x = {fn(k) for k in w.x}
    w.z = {fn(k) for k in w.z}


def _gate_instances_overlapping(gate: CliffordGate, keys: set, n: int):
    """Lattice translates of ``gate`` whose operand keys meet ``keys``;
    yields the translation vector of each overlapping copy."""
    sites = set()
    for cell, qubit in keys:
        for op_cell, op_qubit in gate.operands:
            if op_qubit != qubit:
                continue
            sites.add(tuple(c - o for c, o in zip(cell, op_cell)))
    return sorted(sites)


def conjugate_pauli(word: PauliWord, evo: CliffordEvolution, n: int,
                    forward: bool = True,
                    max_radius: int | None = None) -> PauliWord:
    """Exact Heisenberg image of a Pauli word under one automaton step.

    Forward means A P A†: gates are visited in reverse temporal order with
    the inverse single-gate rules, and shifts move keys against the data
    flow; backward is A† P A.
    """
    w = word.copy()
    gates = list(reversed(evo.gates)) if forward else list(evo.gates)
    rules = _FORWARD if forward else _BACKWARD
    if max_radius is None:
        grow = sum(max((max(abs(c) for cell, _ in g.operands for c in cell),
                        1)) for g in evo.gates)
        base = max((abs(c) for k in w.keys() for c in k[0]), default=0)
        max_radius = base + 4 * (grow + 1)
    for g in gates:
        if g.kind == "SHIFT":
            (offset, qubit), = g.operands
            sign = 1 if forward else -1

            def shifted(k, offset=offset, qubit=qubit, sign=sign):
                cell, q = k
                if q != qubit:
                    return k
                return (tuple(c + sign * o for c, o in zip(cell, offset)), q)

            _relabel_keys(w, shifted)
            continue
        rule = rules[g.kind]
        # translated copies of a Clifford layer commute pairwise only if they
        # never share a qubit with conflicting roles; iterate to a fixpoint so
        # copies pulled into the support by earlier copies are also applied.
        applied = set()
        while True:
            pending = [s for s in _gate_instances_overlapping(g, w.keys(), n)
                       if s not in applied]
            if not pending:
                break
            for site in pending:
                ops = [(tuple(c + s for c, s in zip(cell, site)), q)
                       for cell, q in g.operands]
                for cell, _ in ops:
                    if any(abs(c) > max_radius for c in cell):
                        raise CausalityViolation(
                            "conjugated Pauli word escaped the allowed "
                            "radius %d" % max_radius, cells=(cell,))
                rule(w, *ops)
                applied.add(site)
    return w


# -- F2 linear algebra --------------------------------------------------------

def f2_rank(rows: np.ndarray) -> int:
    """Rank over GF(2) by in-place elimination on a copy."""
    m = (np.asarray(rows, dtype=np.uint8) & 1).copy()
    rank = 0
    ncols = m.shape[1] if m.ndim == 2 and m.size else 0
    for col in range(ncols):
        pivot = None
        for r in range(rank, m.shape[0]):
            if m[r, col]:
                pivot = r
                break
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        hits = m[:, col].astype(bool).copy()
        hits[rank] = False
        m[hits] ^= m[rank]
        rank += 1
    return rank


def _bit_rows(words, keys_order) -> np.ndarray:
    idx = {k: i for i, k in enumerate(keys_order)}
    n = len(keys_order)
    rows = np.zeros((len(words), 2 * n), dtype=np.uint8)
    for r, w in enumerate(words):
        for k in w.x:
            rows[r, idx[k]] = 1
        for k in w.z:
            rows[r, n + idx[k]] = 1
    return rows


def cell_pauli_generators(m: int, cell) -> list:
    """X and Z on every qubit of one cell: generators of the cell algebra."""
    out = []
    for q in range(m):
        out.append(single_pauli("X", (cell, q)))
        out.append(single_pauli("Z", (cell, q)))
    return out


@dataclass(frozen=True)
class CliffordCriterion:
    offsets: tuple
    d_dims: dict
    span_product_dimension: int
    cell_algebra_dimension: int
    verdict: bool


def clifford_infer_neighborhood(desc: QcaDescriptor) -> tuple:
    """Exact causal neighborhood from the Pauli generators: forward support
    offsets united with the reflected backward support offsets."""
    evo = desc.evolution
    m = evo.qubits_per_cell
    zero = (0,) * desc.n
    fwd, bwd = set(), set()
    for w in cell_pauli_generators(m, zero):
        fwd |= conjugate_pauli(w, evo, desc.n, forward=True).cells()
        bwd |= conjugate_pauli(w, evo, desc.n, forward=False).cells()
    return tuple(sorted(fwd | {tuple(-c for c in z) for z in bwd}))


def clifford_causality_check(desc: QcaDescriptor) -> None:
    """Forward images of cell-0 generators must stay inside the declared
    neighborhood and backward images inside its reflection."""
    evo = desc.evolution
    m = evo.qubits_per_cell
    zero = (0,) * desc.n
    allowed_fwd = set(desc.neighborhood.offsets)
    allowed_bwd = {tuple(-c for c in z) for z in desc.neighborhood.offsets}
    for w in cell_pauli_generators(m, zero):
        for forward, allowed in ((True, allowed_fwd), (False, allowed_bwd)):
            img = conjugate_pauli(w, evo, desc.n, forward=forward)
            escape = img.cells() - allowed
            if escape:
                raise CausalityViolation(
                    "%s image of a cell generator escapes the declared"
                    " neighborhood" % ("forward" if forward else "backward"),
                    cells=escape)


def clifford_criterion(desc: QcaDescriptor, offsets) -> CliffordCriterion:
    """Dimensions of the intersection algebras and their product span,
    computed exactly over F2.

    For a group algebra generated by Pauli words, dim = 2^rank of the bit
    matrix of its generators.  The intersection with the cell-0 algebra is
    read off a row-reduced form: words whose support sticks out of cell 0
    are eliminated first, and the intersection rank is the drop.
    """
    clifford_causality_check(desc)
    evo = desc.evolution
    m = evo.qubits_per_cell
    zero = (0,) * desc.n
    d_dims = {}
    cell0_rows = []
    for y in offsets:
        src = tuple(-c for c in y)
        gens = [conjugate_pauli(w, evo, desc.n, forward=True)
                for w in cell_pauli_generators(m, src)]
        keys = sorted({k for w in gens for k in w.keys()})
        rows = _bit_rows(gens, keys)
        outside = [i for i, k in enumerate(keys) if k[0] != zero]
        out_cols = np.concatenate([rows[:, outside],
                                   rows[:, [len(keys) + i for i in outside]]],
                                  axis=1) if outside else np.zeros(
                                      (rows.shape[0], 0), dtype=np.uint8)
        r_all = f2_rank(rows)
        r_out = f2_rank(out_cols)
        d_dims[y] = 2 ** (r_all - r_out)
        # rows of the intersection live in the kernel of the outside part;
        # for the product span it suffices to stack the cell-0 restrictions
        # of kernel combinations, obtained by elimination
        cell0_rows.extend(_intersection_rows(rows, keys, zero))
    if cell0_rows:
        span_rank = f2_rank(np.stack(cell0_rows))
    else:
        span_rank = 0
    span_dim = 2 ** span_rank
    cell_dim = 4 ** m
    return CliffordCriterion(tuple(offsets), d_dims, span_dim, cell_dim,
                             span_dim == cell_dim)


def _intersection_rows(rows: np.ndarray, keys, zero) -> list:
    """Cell-0 bit rows of the subgroup of words supported inside cell 0.

    Gaussian elimination prioritising the outside columns leaves the
    kernel-of-outside combinations as the trailing rows; their cell-0
    columns are returned.
    """
    n = len(keys)
    outside = [i for i, k in enumerate(keys) if k[0] != zero]
    inside = [i for i, k in enumerate(keys) if k[0] == zero]
    order = ([i for i in outside] + [n + i for i in outside]
             + [i for i in inside] + [n + i for i in inside])
    m = rows[:, order].astype(np.uint8).copy()
    n_out = 2 * len(outside)
    rank = 0
    for col in range(n_out):
        pivot = next((r for r in range(rank, m.shape[0]) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        hits = m[:, col].astype(bool).copy()
        hits[rank] = False
        m[hits] ^= m[rank]
        rank += 1
    return [row[n_out:] for row in m[rank:]]


# -- dense cross-check helpers ------------------------------------------------

_PAULI = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(word: PauliWord, keys_order) -> np.ndarray:
    """Dense matrix of a word on an explicit ordered key list."""
    mat = np.array([[1]], dtype=complex)
    for k in keys_order:
        xb, zb = int(k in word.x), int(k in word.z)
        if xb and zb:
            local = _PAULI[(1, 0)] @ _PAULI[(0, 1)]
        else:
            local = _PAULI[(xb, zb)]
        mat = np.kron(mat, local)
    return (1j ** (word.phase % 4)) * mat


def quiescent_is_stabilizer_state(desc: QcaDescriptor) -> bool:
    """The computational-basis quiescent cell is always a stabilizer state;
    kept as an explicit check point for the backend dispatch."""
    comps = quiescent_components(desc)
    return all(c in (0, 1) for c in comps)
