"""Deciding and simulating quantum lattice-gas automata.

A quantum cellular automaton is given as a descriptor (circuit layers,
qubit Clifford rules, or an explicit lattice-gas form); this package decides
whether it admits a lattice-gas decomposition, extracts the cell
isomorphism / propagation / collision triple when it does, and evolves
finite configurations of the resulting gas.
"""

from .decider import (ClassificationResult, Decomposition, as_qlga_descriptor,
                      decide, extract_collision, fix_quiescent,
                      roundtrip_residual)
from .descriptor import (CapExceededError, DescriptorError, NumericalError,
                         QcaDescriptor, content_hash, parse)
from .heisenberg import (CausalityViolation, DAlgebraReport,
                         conjugate_backward, conjugate_forward,
                         criterion_report, d_algebras)
from .sim import ConfigState, from_cells, observe, run, step

__version__ = "0.1.0"

__all__ = [
    "CapExceededError",
    "CausalityViolation",
    "ClassificationResult",
    "ConfigState",
    "DAlgebraReport",
    "Decomposition",
    "DescriptorError",
    "NumericalError",
    "QcaDescriptor",
    "as_qlga_descriptor",
    "conjugate_backward",
    "conjugate_forward",
    "content_hash",
    "criterion_report",
    "d_algebras",
    "decide",
    "extract_collision",
    "fix_quiescent",
    "from_cells",
    "observe",
    "parse",
    "roundtrip_residual",
    "run",
    "step",
]
