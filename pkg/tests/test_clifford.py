"""Exact Pauli conjugation rules against dense matrices, and the F2 criterion."""

import itertools

import numpy as np
import pytest

from qlga.clifford import (
    CliffordCriterion,
    PauliWord,
    cell_pauli_generators,
    clifford_causality_check,
    clifford_criterion,
    clifford_infer_neighborhood,
    conjugate_pauli,
    f2_rank,
    pauli_matrix,
    single_pauli,
)
from qlga.descriptor import CliffordEvolution, CliffordGate, _CLIFFORD_MATS
from qlga.gallery import (
    cnot_chain,
    controlled_flips_2d,
    partial_adder,
    shifted_partial_adder,
)
from qlga.heisenberg import CausalityViolation

K0 = ((0,), 0)
K1 = ((0,), 1)
PAULIS = ["I", "X", "Z", "Y"]


def _word(kinds, keys):
    w = PauliWord()
    for kind, key in zip(kinds, keys):
        if kind == "I":
            continue
        p = single_pauli(kind, key)
        w.x |= p.x
        w.z |= p.z
        w.phase = (w.phase + p.phase) % 4
    return w


def _single_gate_evo(kind, operands):
    return CliffordEvolution(2, (CliffordGate(kind, operands),))


@pytest.mark.parametrize("kind,operands", [
    ("CNOT", (K0, K1)),
    ("CZ", (K0, K1)),
    ("H", (K0,)),
    ("S", (K0,)),
    ("X", (K0,)),
    ("Z", (K0,)),
])
def test_gate_rules_match_dense_conjugation(kind, operands):
    evo = _single_gate_evo(kind, operands)
    keys = [K0, K1]
    G = _CLIFFORD_MATS[kind]
    if len(operands) == 1:
        G = np.kron(G, np.eye(2))     # keys order puts qubit 0 first
    for kinds in itertools.product(PAULIS, repeat=2):
        w = _word(kinds, keys)
        P = pauli_matrix(w, keys)
        fwd = pauli_matrix(conjugate_pauli(w, evo, 1, forward=True), keys)
        bwd = pauli_matrix(conjugate_pauli(w, evo, 1, forward=False), keys)
        assert np.allclose(fwd, G.conj().T @ P @ G), (kind, kinds, "forward")
        assert np.allclose(bwd, G @ P @ G.conj().T), (kind, kinds, "backward")


def test_phase_canonical_form():
    # Y = i X Z in canonical order; H swaps X and Z picking up a sign
    y = single_pauli("Y", K0)
    evo = _single_gate_evo("H", (K0,))
    img = conjugate_pauli(y, evo, 1, forward=False)
    assert np.allclose(pauli_matrix(img, [K0]),
                       -pauli_matrix(y, [K0]))        # H Y H = -Y


@pytest.mark.parametrize("builder", [cnot_chain, shifted_partial_adder,
                                     lambda: partial_adder()])
def test_forward_backward_roundtrip(builder):
    d = builder()
    evo = d.evolution
    m = evo.qubits_per_cell
    for w in cell_pauli_generators(m, (0,)):
        img = conjugate_pauli(w, evo, 1, forward=True)
        back = conjugate_pauli(img, evo, 1, forward=False)
        assert back == w


def test_whole_step_images_match_dense_ring():
    # automaton-level oracle: bit-rule conjugation vs the assembled unitary
    from qlga.descriptor import build_window_unitary
    d = cnot_chain()
    L = 4
    U, _ = build_window_unitary(d, (L,))
    keys = [((c,), q) for c in range(L) for q in range(3)]
    rng = np.random.default_rng(3)
    v = rng.standard_normal((4096, 2)) + 1j * rng.standard_normal((4096, 2))
    for w in cell_pauli_generators(3, (1,)):
        img = conjugate_pauli(w, d.evolution, 1, forward=True)
        P = pauli_matrix(w, keys)
        Q = pauli_matrix(img, keys)
        assert np.linalg.norm(U.conj().T @ (P @ (U @ v)) - Q @ v) < 1e-9


def test_f2_rank_against_reference_elimination():
    def ref_rank(m):
        m = [list(map(int, row)) for row in m]
        rank, ncols = 0, len(m[0]) if m else 0
        for c in range(ncols):
            piv = next((r for r in range(rank, len(m)) if m[r][c]), None)
            if piv is None:
                continue
            m[rank], m[piv] = m[piv], m[rank]
            for r in range(len(m)):
                if r != rank and m[r][c]:
                    m[r] = [a ^ b for a, b in zip(m[r], m[rank])]
            rank += 1
        return rank

    rng = np.random.default_rng(0)
    for _ in range(40):
        rows = rng.integers(0, 2, size=(rng.integers(1, 9), rng.integers(1, 9)))
        assert f2_rank(rows) == ref_rank(rows)
    assert f2_rank(np.zeros((3, 5), dtype=np.uint8)) == 0
    assert f2_rank(np.eye(4, dtype=np.uint8)) == 4


def test_criterion_entangling_rule():
    res = clifford_criterion(cnot_chain(), ((-1,), (0,), (1,)))
    assert isinstance(res, CliffordCriterion)
    assert [res.d_dims[y] for y in res.offsets] == [1, 8, 1]
    assert res.span_product_dimension == 8
    assert res.cell_algebra_dimension == 64
    assert not res.verdict


def test_criterion_two_dimensional_rule():
    d = controlled_flips_2d()
    res = clifford_criterion(d, d.neighborhood.offsets)
    assert res.span_product_dimension == 512
    assert res.cell_algebra_dimension == 4 ** 9
    assert not res.verdict


def test_criterion_shifted_rule_is_lattice_gas():
    d = shifted_partial_adder()
    res = clifford_criterion(d, d.neighborhood.offsets)
    assert res.verdict
    assert res.span_product_dimension == 16
    assert res.d_dims[(0,)] * res.d_dims[(1,)] >= 16


def test_causality_check_rejects_truncated_neighborhood():
    d = partial_adder(neighborhood=((0,), (1,)))
    with pytest.raises(CausalityViolation):
        clifford_causality_check(d)
    clifford_causality_check(partial_adder())   # true neighborhood passes


def test_infer_neighborhood_exact():
    assert clifford_infer_neighborhood(
        partial_adder(neighborhood=((0,), (1,)))) == ((-1,), (0,), (1,))
    assert clifford_infer_neighborhood(shifted_partial_adder()) == ((0,), (1,))
