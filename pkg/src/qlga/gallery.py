"""Ready-made automata: lattice gases, qubit rules, and random instances.

Every builder returns a parsed descriptor whose ``source`` is the plain JSON
document, so the gallery doubles as format documentation and as test input.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .descriptor import QcaDescriptor, matrix_to_json, parse


def two_track_gas(theta: float = math.pi / 4, alpha: float = 0.0,
              beta: float = 0.0) -> QcaDescriptor:
    """One-dimensional two-track gas: left/right movers exchange with a
    scattering phase when they meet.  theta = 0 is purely ballistic."""
    c = cmath.exp(1j * alpha) * math.cos(theta)
    s = 1j * cmath.exp(1j * alpha) * math.sin(theta)
    F = np.array([
        [1, 0, 0, 0],
        [0, s, c, 0],
        [0, c, s, 0],
        [0, 0, 0, cmath.exp(1j * beta)],
    ], dtype=complex)
    doc = {
        "dimension": 1,
        "cell": {"dim": 4, "quiescent": 0},
        "neighborhood": [[-1], [1]],
        "evolution": {
            "type": "qlga",
            "factors": [
                {"offset": [-1], "dim": 2, "quiescent": 0},
                {"offset": [1], "dim": 2, "quiescent": 0},
            ],
            "collision": matrix_to_json(F),
        },
    }
    return parse(doc)


def cnot_chain() -> QcaDescriptor:
    """Three qubit tracks per cell; the middle track controls flips on the
    outer tracks of both neighbors.  Causal but not a lattice gas."""
    doc = {
        "dimension": 1,
        "cell": {"dim": 8, "quiescent": 0},
        "neighborhood": [[-1], [0], [1]],
        "evolution": {
            "type": "clifford",
            "qubits_per_cell": 3,
            "gates": [
                {"kind": "CNOT", "operands": [
                    {"offset": [-1], "qubit": 1}, {"offset": [0], "qubit": 0}]},
                {"kind": "CNOT", "operands": [
                    {"offset": [1], "qubit": 1}, {"offset": [0], "qubit": 2}]},
            ],
        },
    }
    return parse(doc)


def controlled_flips_2d() -> QcaDescriptor:
    """Two-dimensional nine-qubit rule: the center track of each cell flips
    the mirror track of every neighbor.  Causal but not a lattice gas."""
    offsets = [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)]

    def track(off):
        return 3 * (off[0] + 1) + (off[1] + 1)

    gates = []
    for y in offsets:
        if y == (0, 0):
            continue
        gates.append({"kind": "CNOT", "operands": [
            {"offset": [0, 0], "qubit": 4},
            {"offset": list(y), "qubit": track((-y[0], -y[1]))}]})
    doc = {
        "dimension": 2,
        "cell": {"dim": 512, "quiescent": 0},
        "neighborhood": [list(y) for y in offsets],
        "evolution": {"type": "clifford", "qubits_per_cell": 9, "gates": gates},
    }
    return parse(doc)


def partial_adder(neighborhood=((-1,), (0,), (1,))) -> QcaDescriptor:
    """Two qubit tracks; track 0 of the cell and of the right neighbor both
    flip track 1.  The backward image spreads left, so the causal
    neighborhood is {-1, 0, 1} even though the gates only look right."""
    doc = {
        "dimension": 1,
        "cell": {"dim": 4, "quiescent": 0},
        "neighborhood": [list(z) for z in neighborhood],
        "evolution": {
            "type": "clifford",
            "qubits_per_cell": 2,
            "gates": [
                {"kind": "CNOT", "operands": [
                    {"offset": [0], "qubit": 0}, {"offset": [0], "qubit": 1}]},
                {"kind": "CNOT", "operands": [
                    {"offset": [1], "qubit": 0}, {"offset": [0], "qubit": 1}]},
            ],
        },
    }
    return parse(doc)


def shifted_partial_adder() -> QcaDescriptor:
    """The partial adder followed by relaying track 0 one cell leftward;
    the shift re-centers the rule, making it a lattice gas on {0, 1}."""
    doc = {
        "dimension": 1,
        "cell": {"dim": 4, "quiescent": 0},
        "neighborhood": [[0], [1]],
        "evolution": {
            "type": "clifford",
            "qubits_per_cell": 2,
            "gates": [
                {"kind": "CNOT", "operands": [
                    {"offset": [0], "qubit": 0}, {"offset": [0], "qubit": 1}]},
                {"kind": "CNOT", "operands": [
                    {"offset": [1], "qubit": 0}, {"offset": [0], "qubit": 1}]},
                {"kind": "SHIFT", "operands": [
                    {"offset": [1], "qubit": 0}]},
            ],
        },
    }
    return parse(doc)


def identity_automaton(dim: int = 2, n: int = 1) -> QcaDescriptor:
    doc = {
        "dimension": n,
        "cell": {"dim": dim, "quiescent": 0},
        "neighborhood": [[0] * n],
        "evolution": {
            "type": "qlga",
            "factors": [{"offset": [0] * n, "dim": dim, "quiescent": 0}],
            "collision": matrix_to_json(np.eye(dim)),
        },
    }
    return parse(doc)


def _haar_unitary(dim: int, rng) -> np.ndarray:
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _vacuum_fixing_unitary(dim: int, rng) -> np.ndarray:
    out = np.eye(dim, dtype=complex)
    if dim > 1:
        out[1:, 1:] = _haar_unitary(dim - 1, rng)
    return out


def random_qlga(seed: int, factor_dims=(2, 2), offsets=((-1,), (1,)),
                with_isomorphism: bool = True,
                quiescent: int | None = None) -> QcaDescriptor:
    """A random lattice gas: Haar collision fixing the vacuum, and optionally
    a random cell isomorphism hiding the product structure."""
    rng = np.random.default_rng(seed)
    offsets = tuple(tuple(z) for z in offsets)
    n = len(offsets[0])
    dW = math.prod(factor_dims)
    F = _vacuum_fixing_unitary(dW, rng)
    doc = {
        "dimension": n,
        "cell": {"dim": dW, "quiescent": 0},
        "neighborhood": [list(z) for z in offsets],
        "evolution": {
            "type": "qlga",
            "factors": [{"offset": list(z), "dim": d, "quiescent": 0}
                        for z, d in zip(offsets, factor_dims)],
            "collision": matrix_to_json(F),
        },
    }
    if with_isomorphism:
        q0 = int(rng.integers(dW)) if quiescent is None else quiescent
        m = _haar_unitary(dW, rng)
        # rotate so the quiescent cell lands exactly on the vacuum tensor
        v = m[:, q0]
        basis = [v]
        for j in range(dW):
            w = np.zeros(dW, dtype=complex)
            w[j] = 1.0
            for b in basis:
                w -= np.vdot(b, w) * b
            nrm = np.linalg.norm(w)
            if nrm > 1e-7:
                basis.append(w / nrm)
            if len(basis) == dW:
                break
        S = np.stack(basis, axis=1).conj().T @ m
        doc["cell"]["quiescent"] = q0
        doc["evolution"]["isomorphism"] = matrix_to_json(S)
    return parse(doc)
