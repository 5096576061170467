"""Finite-configuration evolution against the ring-unitary oracle."""

import json
import math

import numpy as np
import pytest

from qlga.descriptor import build_window_unitary
from qlga.gallery import two_track_gas, random_qlga, cnot_chain
from qlga.sim import (
    ConfigState,
    SimulationError,
    from_cells,
    observe,
    quiescent_cell_index,
    run,
    state_from_json,
    state_to_json,
    step,
)


def _ring_embed(state, L, ref_origin):
    """Flat ring vector with the box placed at positions (cell - ref) mod L."""
    q = quiescent_cell_index(state.cell_dims, state.quiescent)
    dW = state.cell_dim
    index = [q] * L
    for cell in state.cells():
        p = cell[0] - ref_origin
        assert 0 <= p < L, "reference window too small"
        index[p] = slice(None)
    full = np.zeros((dW,) * L, dtype=complex)
    full[tuple(index)] = state.tensor
    return full.reshape(-1)


@pytest.mark.parametrize("builder", [
    two_track_gas,
    lambda: random_qlga(4, factor_dims=(2, 2), with_isomorphism=True),
])
def test_one_step_matches_ring_unitary(builder):
    d = builder()
    state = from_cells({(0,): 3}, d)
    after = step(state, d)
    L = 6
    ref = min(state.origin[0], after.origin[0]) - 1
    U, _ = build_window_unitary(d, (L,))
    expect = U @ _ring_embed(state, L, ref)
    got = _ring_embed(after, L, ref)
    assert np.linalg.norm(expect - got) < 1e-12


def test_two_steps_match_ring_unitary():
    d = two_track_gas()
    state = from_cells({(0,): 3}, d)
    after = run(state, d, 2)
    L = 6   # 4096-dim ring, the largest below the dense cap
    ref = min(state.origin[0], after.origin[0])
    U, _ = build_window_unitary(d, (L,))
    expect = U @ (U @ _ring_embed(state, L, ref))
    got = _ring_embed(after, L, ref)
    assert np.linalg.norm(expect - got) < 1e-12


def test_norm_is_conserved():
    d = two_track_gas()
    state = from_cells({(0,): [0.0, 0.6, 0.0, 0.8]}, d)
    out = run(state, d, 4)
    assert abs(out.norm() - 1.0) < 1e-12


def test_ballistic_excitation_moves_one_cell_per_step():
    # component bound to offset +1 relays leftward: new(x) = old(x + 1)
    d = two_track_gas(theta=0.0)
    state = from_cells({(0,): 1}, d)   # cell state |0>_{-1} |1>_{+1}
    out = step(state, d)
    assert out.extent == (1,)
    assert out.origin == (-1,)
    probs = observe(out)[(-1,)]
    # at theta=0 the collision exchanges the tracks, so the relayed
    # excitation arrives on the other component
    assert probs[2] == pytest.approx(1.0)


def test_translation_covariance_is_exact():
    d = two_track_gas()
    a = run(from_cells({(0,): 3}, d), d, 3)
    b = run(from_cells({(5,): 3}, d), d, 3)
    assert tuple(o + 5 for o in a.origin) == b.origin
    assert a.extent == b.extent
    assert np.array_equal(a.tensor, b.tensor)


def test_trim_keeps_box_tight_and_pad_is_invisible():
    d = two_track_gas(theta=0.0)
    state = from_cells({(0,): 1}, d)
    loose = step(state, d, trim=False)
    tight = step(state, d, trim=True)
    assert loose.extent[0] > tight.extent[0]
    ref = min(loose.origin[0], tight.origin[0]) - 1
    L = loose.extent[0] + 4
    assert np.allclose(_ring_embed(loose, L, ref), _ring_embed(tight, L, ref))


def test_quiescent_background_is_absorbing():
    d = random_qlga(2, factor_dims=(2, 2), with_isomorphism=True)
    q = quiescent_cell_index((4,), (d.cell.quiescent_index,))
    state = from_cells({(0,): d.cell.quiescent_index}, d)
    out = run(state, d, 3)
    probs = observe(out)
    for cell, p in probs.items():
        assert p[d.cell.quiescent_index] == pytest.approx(1.0)


def test_observe_probabilities_sum_to_one():
    d = two_track_gas()
    out = run(from_cells({(0,): 3}, d), d, 2)
    probs = observe(out)
    assert sum(float(np.sum(p)) for p in probs.values()) == pytest.approx(
        len(probs), rel=0, abs=1e-10)
    # each cell's occupation distribution individually sums to one
    for p in probs.values():
        assert float(np.sum(p)) == pytest.approx(1.0)


def test_state_json_roundtrip():
    d = two_track_gas()
    state = run(from_cells({(0,): 3}, d), d, 1)
    doc = state_to_json(state)
    back = state_from_json(json.dumps(doc))
    assert back.origin == state.origin
    assert back.extent == state.extent
    assert np.allclose(back.tensor, state.tensor)


def test_from_cells_rejects_zero_vector():
    with pytest.raises(SimulationError):
        from_cells({(0,): [0.0, 0.0, 0.0, 0.0]}, two_track_gas())


def test_step_requires_lattice_gas_form():
    state = ConfigState((0,), (1,), (8,), (0, 0, 0),
                        np.eye(8, dtype=complex)[:, 0].reshape(8))
    with pytest.raises(SimulationError):
        step(state, cnot_chain())


def test_state_from_json_checks_amplitude_count():
    d = two_track_gas()
    doc = state_to_json(from_cells({(0,): 1}, d))
    doc["amplitudes"] = doc["amplitudes"][:-1]
    with pytest.raises(SimulationError):
        state_from_json(doc)
