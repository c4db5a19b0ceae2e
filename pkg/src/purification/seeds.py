"""Seed derivation.

Per-circuit seeds are the first 8 bytes (little-endian, top bit cleared) of
``blake2b(f"{master}:{index}")``, so they depend only on the master seed and
the circuit index, not on platform or on how work is split across
processes.  Each circuit seed fans out into independent Philox streams via
``SeedSequence`` spawn keys.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

PREP, GATES, OUTCOMES, SHOTS = 0, 1, 2, 3


def circuit_seed(master: int, index: int) -> int:
    digest = hashlib.blake2b(f"{int(master)}:{int(index)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the child ``key`` of ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass
class CircuitStreams:
    prep: np.random.Generator
    gates: np.random.Generator
    outcomes: np.random.Generator


def circuit_streams(seed: int, branch: int = 0) -> CircuitStreams:
    """Streams for one circuit.  ``branch > 0`` selects another outcome stream."""
    outcome_key = (OUTCOMES,) if branch == 0 else (OUTCOMES, branch)
    return CircuitStreams(stream(seed, PREP), stream(seed, GATES), stream(seed, *outcome_key))
