"""Fixed enumeration of the 24 single-qubit Clifford gates.

Each element is a word over ``{H, S}`` read left to right in time order, so
``"HS"`` means "apply H, then S".  The table is the breadth-first enumeration
of the group (shortest words first, ``H`` tried before ``S``) and is shipped
as a constant so that seeded circuits stay reproducible across versions.
"""

from __future__ import annotations

import numpy as np

CLIFFORD_WORDS: tuple[str, ...] = (
    "",
    "H",
    "S",
    "HS",
    "SH",
    "SS",
    "HSH",
    "HSS",
    "SHS",
    "SSH",
    "SSS",
    "HSHS",
    "HSSH",
    "HSSS",
    "SHSS",
    "SSHS",
    "HSHSS",
    "HSSHS",
    "SHSSH",
    "SHSSS",
    "SSHSS",
    "HSHSSH",
    "HSHSSS",
    "HSSHSS",
)

N_CLIFFORD_1Q = len(CLIFFORD_WORDS)
IDENTITY = 0
HADAMARD = CLIFFORD_WORDS.index("H")
PHASE = CLIFFORD_WORDS.index("S")
PHASE_DAG = CLIFFORD_WORDS.index("SSS")
PAULI_X = CLIFFORD_WORDS.index("HSSH")
PAULI_Z = CLIFFORD_WORDS.index("SS")

# Longest word has 6 letters.  Codes: 0 = end of word, 1 = H, 2 = S.
MAX_WORD = 6
WORD_CODES = np.zeros((N_CLIFFORD_1Q, MAX_WORD), dtype=np.int64)
for _i, _w in enumerate(CLIFFORD_WORDS):
    for _j, _ch in enumerate(_w):
        WORD_CODES[_i, _j] = 1 if _ch == "H" else 2

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)


def clifford_matrix(idx: int) -> np.ndarray:
    """Return the 2x2 unitary of Clifford ``idx`` (global phase as composed)."""
    check_index(idx)
    u = np.eye(2, dtype=complex)
    for ch in CLIFFORD_WORDS[idx]:
        u = (_H if ch == "H" else _S) @ u
    return u


def check_index(idx: int) -> None:
    if not 0 <= idx < N_CLIFFORD_1Q:
        raise ValueError(f"Clifford index must be in [0, {N_CLIFFORD_1Q}), got {idx}")


# Pauli images under conjugation.  A Pauli is (x, z) in {0,1}^2 with sign.
def _conjugate(word: str, x: int, z: int) -> tuple[int, int, int]:
    sign = 0
    for ch in word:
        if ch == "H":
            sign ^= x & z
            x, z = z, x
        else:
            sign ^= x & z
            z ^= x
    return x, z, sign


def _signature(idx: int) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
    w = CLIFFORD_WORDS[idx]
    return _conjugate(w, 1, 0), _conjugate(w, 0, 1)


_BY_SIGNATURE = {_signature(i): i for i in range(N_CLIFFORD_1Q)}


def _compose(first: int, second: int) -> int:
    return _BY_SIGNATURE[_signature_of_word(CLIFFORD_WORDS[first] + CLIFFORD_WORDS[second])]


def _signature_of_word(word: str):
    return _conjugate(word, 1, 0), _conjugate(word, 0, 1)


# MULTIPLY[a, b] is the element equal to "apply a, then b".
MULTIPLY = np.array(
    [[_compose(a, b) for b in range(N_CLIFFORD_1Q)] for a in range(N_CLIFFORD_1Q)],
    dtype=np.int64,
)
INVERSE = np.array(
    [int(np.flatnonzero(MULTIPLY[a] == IDENTITY)[0]) for a in range(N_CLIFFORD_1Q)],
    dtype=np.int64,
)


def sample_clifford_1q(rng: np.random.Generator) -> int:
    """Draw a Clifford index uniformly from the 24-element table."""
    return int(rng.integers(N_CLIFFORD_1Q))
