"""Exact stabilizer-state simulation (bit-packed tableau)."""

from .cliffords import CLIFFORD_WORDS, N_CLIFFORD_1Q, clifford_matrix, sample_clifford_1q
from .pauli import Basis, PauliString
from .tableau import Tableau, audit, new_tableau

__all__ = [
    "CLIFFORD_WORDS",
    "N_CLIFFORD_1Q",
    "Basis",
    "PauliString",
    "Tableau",
    "audit",
    "clifford_matrix",
    "new_tableau",
    "sample_clifford_1q",
]
