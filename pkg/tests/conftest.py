"""Shared oracles for the test suite.

The dense-ring helpers below deliberately reimplement nothing from the
package's local-conjugation path: they assemble the whole window unitary and
work with explicit matrices, so they can serve as an independent oracle for
the lightcone computations.
"""

import numpy as np

from qlga import lattice
from qlga.descriptor import build_window_unitary, cell_subdims
from qlga.lattice import RingWindow, window_slots


def ring_operator_matrix(d, op, lengths):
    """Embed a local operator on a periodic window as a dense matrix."""
    window = RingWindow(d.n, lengths, d.cell)
    subdims = cell_subdims(d)
    slots = window_slots(window, subdims)
    dims = tuple(subdims[c] for _, c in slots)
    reduced = lattice.embed_window(op, window)
    return lattice.embed(reduced, tuple(slots), dims).matrix


def dense_conjugate(d, op, lengths, forward=True, U=None):
    """R† A R (forward) or R A R† computed with the full ring unitary."""
    if U is None:
        U, _ = build_window_unitary(d, lengths)
    A = ring_operator_matrix(d, op, lengths)
    if forward:
        return U.conj().T @ A @ U
    return U @ A @ U.conj().T


def random_unitary(dim, rng):
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))
