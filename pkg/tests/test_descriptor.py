"""Descriptor parsing, validation errors, ring assembly, and content hashes."""

import json
import math

import numpy as np
import pytest

from qlga.descriptor import (
    CapExceededError,
    DescriptorError,
    build_window_unitary,
    canonical_json,
    content_hash,
    cyclic_shift_permutation,
    matrix_to_json,
    parse,
    quiescent_components,
    ring_quiescent_index,
    window_period,
)
from qlga.gallery import cnot_chain, two_track_gas, shifted_partial_adder
from qlga.lattice import LatticeError


def _brickwork_doc(gate, stride=2):
    """One partitioned two-cell layer applied on the even sublattice."""
    return {
        "dimension": 1,
        "cell": {"dim": 2, "quiescent": 0},
        "neighborhood": [[-1], [0], [1]],
        "evolution": {
            "type": "circuit",
            "layers": [{
                "mode": "partitioned",
                "stride": [stride],
                "gate": {"supports": [[0], [1]], "matrix": matrix_to_json(gate)},
            }],
        },
    }


CZ = np.diag([1, 1, 1, -1]).astype(complex)


def test_parse_gallery_roundtrip():
    d = two_track_gas()
    assert d.kind == "qlga"
    assert d.cell.dim == 4
    assert d.neighborhood.offsets == ((-1,), (1,))
    # re-parsing the JSON source gives the same content hash
    assert content_hash(parse(json.dumps(d.source))) == content_hash(d)


def test_parse_rejects_non_unitary_collision():
    doc = two_track_gas().source.copy()
    doc = json.loads(canonical_json(doc))
    doc["evolution"]["collision"][1][1] = [2.0, 0.0]
    with pytest.raises(DescriptorError, match="not unitary"):
        parse(doc)


def test_parse_rejects_collision_moving_the_vacuum():
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    doc = {
        "dimension": 1,
        "cell": {"dim": 2, "quiescent": 0},
        "neighborhood": [[1]],
        "evolution": {
            "type": "qlga",
            "factors": [{"offset": [1], "dim": 2, "quiescent": 0}],
            "collision": matrix_to_json(X),
        },
    }
    with pytest.raises(DescriptorError, match="quiescent"):
        parse(doc)


def test_parse_rejects_factor_offsets_not_matching_neighborhood():
    doc = json.loads(canonical_json(two_track_gas().source))
    doc["neighborhood"] = [[-1], [0], [1]]
    with pytest.raises(DescriptorError, match="offsets"):
        parse(doc)


def test_parse_rejects_unknown_evolution_type():
    doc = json.loads(canonical_json(two_track_gas().source))
    doc["evolution"]["type"] = "magic"
    with pytest.raises(DescriptorError, match="unknown type"):
        parse(doc)


def test_parse_rejects_clifford_cell_dim_mismatch():
    doc = json.loads(canonical_json(cnot_chain().source))
    doc["cell"]["dim"] = 4
    with pytest.raises(DescriptorError):
        parse(doc)


def test_parse_rejects_malformed_json_text():
    with pytest.raises(DescriptorError, match="JSON"):
        parse("{not json")


def test_parse_rejects_isomorphism_ignoring_the_vacuum():
    doc = json.loads(canonical_json(two_track_gas().source))
    H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    doc["evolution"]["isomorphism"] = matrix_to_json(np.kron(H, np.eye(2)))
    with pytest.raises(DescriptorError, match="isomorphism"):
        parse(doc)


def test_quiescent_components_clifford_digits():
    doc = json.loads(canonical_json(cnot_chain().source))
    doc["cell"]["quiescent"] = 5
    d = parse(doc)
    assert quiescent_components(d) == (1, 0, 1)   # 5 = 0b101 on 3 tracks


def test_quiescent_components_qlga_uses_cell_index():
    doc = json.loads(canonical_json(two_track_gas().source))
    doc["cell"]["quiescent"] = 0
    d = parse(doc)
    assert quiescent_components(d) == (0, 0)
    assert ring_quiescent_index(d, (3,)) == 0


def test_window_period_of_partitioned_circuit():
    d = parse(_brickwork_doc(CZ))
    assert window_period(d) == (2,)
    assert window_period(two_track_gas()) == (1,)


def test_build_window_unitary_enforces_period():
    d = parse(_brickwork_doc(CZ))
    with pytest.raises(LatticeError, match="period"):
        build_window_unitary(d, (5,))
    U, lam = build_window_unitary(d, (6,))
    assert U.shape == (64, 64)
    assert abs(abs(lam) - 1.0) < 1e-12


def test_build_window_unitary_is_unitary_and_fixes_vacuum():
    d = two_track_gas()
    U, lam = build_window_unitary(d, (4,))
    assert U.shape == (256, 256)
    assert np.allclose(U.conj().T @ U, np.eye(256), atol=1e-10)
    e0 = np.zeros(256)
    e0[0] = 1.0
    assert np.allclose(U @ e0, e0, atol=1e-10)


def test_build_window_unitary_respects_dense_cap():
    with pytest.raises(CapExceededError):
        build_window_unitary(two_track_gas(), (8,))


def test_content_hash_is_key_order_independent():
    d = two_track_gas()
    doc = d.source
    reordered = {k: doc[k] for k in reversed(list(doc))}
    assert canonical_json(doc) == canonical_json(reordered)
    assert content_hash(parse(reordered)) == content_hash(d)


def test_content_hash_changes_with_content():
    doc = json.loads(canonical_json(two_track_gas().source))
    doc["cell"]["labels"] = ["a", "b", "c", "d"]
    assert content_hash(parse(doc)) != content_hash(two_track_gas())


def test_cyclic_shift_permutation_has_full_period():
    d = two_track_gas()
    perm = cyclic_shift_permutation(d, (4,))
    idx = np.arange(len(perm))
    out = idx
    for _ in range(4):
        out = out[perm]
    assert np.array_equal(out, idx)
    assert not np.array_equal(idx[perm], idx)


def test_shifted_adder_parses_with_shift_rule():
    d = shifted_partial_adder()
    assert d.kind == "clifford"
    kinds = [g.kind for g in d.evolution.gates]
    assert kinds == ["CNOT", "CNOT", "SHIFT"]
