"""End-to-end classification, gauge fixing, and collision extraction."""

import math

import numpy as np
import pytest

from conftest import random_unitary
from qlga.descriptor import DescriptorError, matrix_to_json, parse
from qlga.decider import (
    Decomposition,
    as_qlga_descriptor,
    decide,
    default_window,
    extract_collision,
    fix_quiescent,
    infer_neighborhood,
    roundtrip_residual,
    translation_defect,
)
from qlga.gallery import (
    cnot_chain,
    identity_automaton,
    two_track_gas,
    partial_adder,
    random_qlga,
    shifted_partial_adder,
)


def _is_kron_of_locals(M, dims):
    """True when M = A_1 (x) ... (x) A_k up to numerical noise."""
    k = len(dims)
    t = M.reshape(dims + dims)
    # successive Schmidt ranks across (first factor) vs (rest) bipartitions
    for i in range(k - 1):
        left = int(np.prod(dims[: i + 1]))
        right = int(np.prod(dims[i + 1:]))
        m = t.reshape(left, right, left, right).transpose(0, 2, 1, 3)
        m = m.reshape(left * left, right * right)
        sv = np.linalg.svd(m, compute_uv=False)
        if sv.size > 1 and sv[1] > 1e-8 * sv[0]:
            return False
    return True


def test_fix_quiescent_maps_vacuum_to_first_basis_vector():
    rng = np.random.default_rng(0)
    dims = (2, 2)
    S = np.kron(random_unitary(2, rng), random_unitary(2, rng)) \
        @ random_unitary(4, rng)
    # make column 2 of S a simple tensor by construction
    a, b = random_unitary(2, rng)[:, 0], random_unitary(2, rng)[:, 1]
    target = np.kron(a, b)
    v = S.conj().T @ target
    fixer = np.eye(4, dtype=complex)
    fixer[:, 2] = v
    q, _ = np.linalg.qr(np.roll(fixer, -2, axis=1))
    S = S @ np.roll(q, 2, axis=1)
    fixed, residual = fix_quiescent(S, dims, q_index=2)
    assert residual < 1e-10
    e0 = np.zeros(4)
    e0[0] = 1.0
    assert np.linalg.norm(fixed[:, 2] - e0) < 1e-10
    assert np.linalg.norm(fixed.conj().T @ fixed - np.eye(4)) < 1e-10
    # the gauge change is purely local: fixed = (G1 (x) G2) S
    assert _is_kron_of_locals(fixed @ S.conj().T, dims)


def test_extract_collision_recovers_explicit_collision():
    d = two_track_gas()
    F_true = d.evolution.collision
    F, diag = extract_collision(d, np.eye(4, dtype=complex), (2, 2), (4,))
    assert np.linalg.norm(F - F_true) < 1e-12
    assert diag["off_block"] < 1e-12
    assert diag["unitarity"] < 1e-12


def test_decide_two_track_gas():
    res = decide(two_track_gas())
    assert res.verdict
    assert res.report.d_dims == (4, 4)
    assert res.report.span_product_dimension == 16
    dec = res.decomposition
    assert dec.factor_dims == (2, 2)
    assert dec.offsets == ((-1,), (1,))
    assert dec.residuals["roundtrip"] < 1e-9
    assert dec.residuals["conjugated_form"] < 1e-9
    assert dec.residuals["one_sided_form"] < 1e-9


def test_decide_entangling_rule_both_backends_agree():
    auto = decide(cnot_chain())                    # exact backend short-circuits
    dense = decide(cnot_chain(), backend="dense")
    for res in (auto, dense):
        assert not res.verdict
        assert res.report.d_dims == (1, 8, 1)
        assert res.report.span_product_dimension == 8
        assert res.decomposition is None
    assert auto.report.backend == "clifford"
    assert dense.report.backend == "dense"


def test_decide_identity_automaton():
    res = decide(identity_automaton(dim=3))
    assert res.verdict
    assert res.decomposition.factor_dims == (3,)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_decide_recovers_random_lattice_gas(seed):
    d = random_qlga(seed, factor_dims=(2, 2), with_isomorphism=True)
    res = decide(d)
    assert res.verdict
    assert res.decomposition.factor_dims == (2, 2)
    assert res.decomposition.residuals["roundtrip"] < 1e-9


def test_decide_recovers_unequal_factor_dims():
    d = random_qlga(3, factor_dims=(2, 3), with_isomorphism=True)
    res = decide(d)
    assert res.verdict
    assert res.decomposition.factor_dims == (2, 3)
    assert res.decomposition.residuals["roundtrip"] < 1e-8


def test_decide_rejects_non_translation_invariant_circuit():
    swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
                    dtype=complex)
    doc = {
        "dimension": 1,
        "cell": {"dim": 2, "quiescent": 0},
        "neighborhood": [[-1], [0], [1]],
        "evolution": {
            "type": "circuit",
            "layers": [{"mode": "partitioned", "stride": [2],
                        "gate": {"supports": [[0], [1]],
                                 "matrix": matrix_to_json(swap)}}],
        },
    }
    with pytest.raises(DescriptorError, match="translation"):
        decide(parse(doc))
    assert translation_defect(parse(doc), (4,)) > 0.1


def test_decide_accepts_translation_invariant_brickwork():
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    doc = {
        "dimension": 1,
        "cell": {"dim": 2, "quiescent": 0},
        "neighborhood": [[-1], [0], [1]],
        "evolution": {
            "type": "circuit",
            "layers": [
                {"mode": "partitioned", "stride": [2],
                 "gate": {"supports": [[0], [1]], "matrix": matrix_to_json(cz)}},
                {"mode": "partitioned", "stride": [2],
                 "gate": {"supports": [[1], [2]], "matrix": matrix_to_json(cz)}},
            ],
        },
    }
    res = decide(parse(doc))
    assert not res.verdict
    assert res.report.span_product_dimension == 2


def test_decide_backend_validation():
    with pytest.raises(ValueError):
        decide(two_track_gas(), backend="clifford")
    with pytest.raises(ValueError):
        decide(two_track_gas(), backend="fancy")


def test_decide_clifford_backend_reports_without_decomposition():
    res = decide(shifted_partial_adder(), backend="clifford")
    assert res.verdict
    assert res.report.backend == "clifford"
    assert res.decomposition is None


def test_truncated_neighborhood_raises_on_both_backends():
    from qlga.heisenberg import CausalityViolation
    d = partial_adder(neighborhood=((0,), (1,)))
    with pytest.raises(CausalityViolation):
        decide(d)
    with pytest.raises(CausalityViolation):
        decide(d, backend="dense")


def test_infer_neighborhood_dispatch():
    d = partial_adder(neighborhood=((0,), (1,)))
    assert infer_neighborhood(d) == ((-1,), (0,), (1,))
    assert infer_neighborhood(d, backend="dense") == ((-1,), (0,), (1,))


def test_default_window_respects_radius():
    assert default_window(two_track_gas()) == (4,)
    d = partial_adder()
    assert default_window(d) == (4,)


def test_as_qlga_descriptor_roundtrip():
    res = decide(two_track_gas())
    dd = as_qlga_descriptor(two_track_gas(), res.decomposition)
    assert dd.kind == "qlga"
    rt = roundtrip_residual(two_track_gas(), res.decomposition, (4,))
    assert rt["method"] == "dense"
    assert rt["roundtrip"] < 1e-9


def test_result_dict_shape():
    res = decide(two_track_gas())
    doc = res.as_dict(include_matrices=True)
    assert doc["verdict"] == "QLGA"
    assert doc["report"]["d_dims"] == [4, 4]
    assert "isomorphism" in doc["decomposition"]
    assert "collision" in doc["decomposition"]
    lean = res.as_dict(include_matrices=False)
    assert "isomorphism" not in lean["decomposition"]


def test_decomposition_reproduces_one_step_matrix():
    # reconstructed S-tilde, sigma, F-hat multiply back to the ring unitary
    from qlga.descriptor import build_window_unitary
    from qlga.lattice import RingWindow, sigma_index_permutation
    d = random_qlga(8, factor_dims=(2, 2), with_isomorphism=True)
    res = decide(d)
    dec = res.decomposition
    L = 4
    U, _ = build_window_unitary(d, (L,))
    s_tilde = np.array([[1.0]], dtype=complex)
    f_hat = np.array([[1.0]], dtype=complex)
    for _ in range(L):
        s_tilde = np.kron(s_tilde, dec.isomorphism)
        f_hat = np.kron(f_hat, dec.collision)
    ring = RingWindow(1, (L,), d.cell)
    perm = sigma_index_permutation(ring, dec.scheme)
    sigma = np.zeros((256, 256))
    sigma[np.arange(256), perm] = 1.0
    rebuilt = s_tilde.conj().T @ f_hat @ sigma @ s_tilde
    assert np.linalg.norm(rebuilt - U) / np.linalg.norm(U) < 1e-9
