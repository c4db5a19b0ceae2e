"""The random circuit ensemble: Bell injection, scrambler, monitored evolution."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..seeds import circuit_streams
from ..stabilizer import Basis, Tableau, sample_clifford_1q
from ..stabilizer import _kernels as K
from ..stabilizer.cliffords import HADAMARD
from .execute import run
from .ops import CNOT, XX, Circuit, Clifford1q, DeferredMeasure, GateOp, MeasureDirect, ng_for


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def build_bell_prep(L: int, rng: np.random.Generator) -> list[GateOp]:
    """H on the reference then CNOT onto a uniformly chosen system qubit."""
    if L < 2:
        raise ValueError(f"system size must be at least 2, got {L}")
    partner = int(rng.integers(L))
    return [Clifford1q(L, HADAMARD), CNOT(L, partner)]


def random_matching(L: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """floor(L/2) disjoint pairs; one qubit idles when L is odd."""
    perm = rng.permutation(L)
    return [(int(perm[2 * i]), int(perm[2 * i + 1])) for i in range(L // 2)]


def build_scrambler(L: int, rng: np.random.Generator) -> list[GateOp]:
    """Four layers: Cliffords on every qubit, XX matching, Cliffords, XX matching."""
    if L < 2:
        raise ValueError(f"system size must be at least 2, got {L}")
    ops: list[GateOp] = []
    for layer in range(4):
        if layer % 2 == 0:
            ops.extend(Clifford1q(q, sample_clifford_1q(rng)) for q in range(L))
        else:
            ops.extend(XX(a, b) for a, b in random_matching(L, rng))
    return ops


@dataclass
class MeasurementPolicy:
    """Eligible-qubit list; refilled once it shrinks to ``reinit_at``."""

    L: int
    eligible: np.ndarray = field(init=False)
    reinit_at: int = field(init=False)

    def __post_init__(self):
        self.eligible = np.ones(self.L, dtype=np.bool_)
        # L < 4 has no L-4 threshold; refill when the list empties
        self.reinit_at = max(self.L - 4, 0)

    @property
    def size(self) -> int:
        return int(self.eligible.sum())


@dataclass
class EvolutionLog:
    pairs: np.ndarray
    meas_step: np.ndarray
    meas_qubit: np.ndarray
    meas_basis: np.ndarray
    meas_outcome: np.ndarray
    steps_run: int

    @property
    def n_measurements(self) -> int:
        return int(self.meas_step.size)


def evolve(
    live: Tableau,
    L: int,
    p: float,
    px: float,
    draws: np.ndarray,
    outcomes: np.ndarray,
    policy: MeasurementPolicy,
    entropy: np.ndarray | None = None,
    stop_when_pure: bool = False,
) -> EvolutionLog:
    """Run the monitored evolution kernel on ``live`` (system + reference)."""
    T = draws.shape[0]
    pairs = np.zeros((T, 2), dtype=np.int64)
    step = np.zeros(T, dtype=np.int64)
    qubit = np.zeros(T, dtype=np.int64)
    basis = np.zeros(T, dtype=np.int64)
    outcome = np.zeros(T, dtype=np.int64)
    ent = np.zeros(0, dtype=np.int64) if entropy is None else entropy
    ran, m, n_el = K.evolve(
        live.xs, live.zs, live.rs, live.smask, live.n, L, L,
        draws, outcomes, float(p), float(px), policy.eligible, policy.size,
        policy.reinit_at, ent, stop_when_pure, pairs, step, qubit, basis, outcome,
    )
    return EvolutionLog(pairs[:ran], step[:m], qubit[:m], basis[:m], outcome[:m], int(ran))


def sample_evolution(
    L: int,
    p: float,
    px: float,
    rng: np.random.Generator,
    live_tableau: Tableau,
    n_gates: int | None = None,
    outcome_rng: np.random.Generator | None = None,
    policy: MeasurementPolicy | None = None,
) -> list[GateOp]:
    """Emit the monitored evolution, collapsing ``live_tableau`` as it goes.

    After each of the ``n_gates`` (default floor(L^1.5)) XX gates on a uniform
    random pair, with probability ``p`` a candidate measurement is drawn on an
    eligible gate qubit (X basis with probability ``px``, else Z).  It is
    emitted only if its outcome is random on the live state; the measured
    qubit then leaves the eligible list.

    Every step consumes five uniforms from ``rng`` whether or not it
    measures, so the gate sequence is a prefix-stable function of the seed.
    """
    _check_probability("p", p)
    _check_probability("px", px)
    if live_tableau.n < L + 1:
        raise ValueError("live tableau must hold the system and the reference")
    T = ng_for(L) if n_gates is None else int(n_gates)
    draws = rng.random((T, 5))
    outcomes = (rng if outcome_rng is None else outcome_rng).random(T)
    log = evolve(live_tableau, L, p, px, draws, outcomes, policy or MeasurementPolicy(L))
    by_step = dict(zip(log.meas_step.tolist(), zip(log.meas_qubit.tolist(), log.meas_basis.tolist())))
    ops: list[GateOp] = []
    for t in range(T):
        a, b = log.pairs[t]
        ops.append(XX(int(a), int(b)))
        if t in by_step:
            q, basis = by_step[t]
            ops.append(MeasureDirect(q, Basis(basis)))
    return ops


def defer_measurements(c: Circuit) -> Circuit:
    """Replace each direct measurement by a CNOT onto a fresh ancilla."""
    if c.n_ancillae and any(isinstance(op, MeasureDirect) for op in c.ops):
        raise ValueError("circuit mixes direct and deferred measurements")
    ops: list[GateOp] = []
    k = 0
    for op in c.ops:
        if isinstance(op, MeasureDirect):
            if op.q == c.reference:
                raise ValueError("the reference qubit cannot be measured")
            ops.append(DeferredMeasure(op.q, c.L + 1 + k, op.basis))
            k += 1
        else:
            ops.append(op)
    if k == 0:
        return c
    return c.with_ops(ops, c.segments, n_ancillae=k)


def build_direct_circuit(L: int, p: float, px: float, seed: int, n_gates: int | None = None) -> Circuit:
    """Bell prep, scrambler and evolution with direct measurements."""
    streams = circuit_streams(seed)
    bell = build_bell_prep(L, streams.prep)
    scr = build_scrambler(L, streams.prep)
    live = Tableau(L + 1)
    run(bell + scr, live)
    evo = sample_evolution(L, p, px, streams.gates, live, n_gates, outcome_rng=streams.outcomes)
    ops = bell + scr + evo
    a, b = len(bell), len(bell) + len(scr)
    segments = {"bell": (0, a), "scrambler": (a, b), "evolution": (b, len(ops))}
    T = ng_for(L) if n_gates is None else int(n_gates)
    return Circuit(L, ops, float(p), float(px), int(seed), 0, segments, T)


def generate_circuit(
    L: int,
    p: float,
    px: float,
    seed: int,
    n_gates: int | None = None,
    feedback: bool = True,
    optimize: bool = True,
    branch_cap: int = 20,
) -> Circuit:
    """Full pipeline; a pure function of its arguments.

    Bell prep, scrambler, evolution, deferral, feedback (if the circuit
    purifies), then single-qubit gate merging.
    """
    from .feedback import append_feedback, purification_profile
    from .optimize import optimize_circuit

    c = defer_measurements(build_direct_circuit(L, p, px, seed, n_gates))
    if feedback and purification_profile(c).purifies:
        c = append_feedback(c, cap=branch_cap)
    if optimize:
        c = optimize_circuit(c)
    c.validate()
    return c
