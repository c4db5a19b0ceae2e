"""Circuit ensembles: entropy trajectories, shot statistics, post-selection.

Trajectory entropy series are indexed by evolution step ``t = 0..T``
(``T`` XX gates after the scrambler).  Every circuit ``i`` of an ensemble
is seeded with :func:`~purification.seeds.circuit_seed` ``(master, i)``,
which makes results independent of execution order and worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np

from .circuit import (
    Align,
    Circuit,
    MeasureDirect,
    XX,
    apply_op,
    direct_form,
    enumerate_deferred,
    generate_circuit,
    ng_for,
    truncate_evolution,
)
from .circuit.generate import MeasurementPolicy, build_bell_prep, build_scrambler, evolve
from .circuit.feedback import reference_basis
from .parallel import pmap
from .seeds import SHOTS, circuit_seed, circuit_streams, stream
from .stabilizer import Basis, Tableau
from .statevector import NoiseParams, binary_entropy, run_noisy_circuit

DEFAULT_THRESHOLD = 0.93
TOMOGRAPHY_SHOTS = 4000


@dataclass
class EnsembleConfig:
    L: int
    p: float
    px: float
    n_circuits: int
    seed: int = 0
    horizon_mult: float = 1.0
    branches: int = 1

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"system size must be at least 2, got {self.L}")
        for name in ("p", "px"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_circuits < 0:
            raise ValueError("circuit count must be non-negative")
        if self.horizon_mult <= 0:
            raise ValueError("horizon multiplier must be positive")
        if self.branches < 1:
            raise ValueError("need at least one branch per circuit")

    @property
    def n_gates(self) -> int:
        return max(1, int(round(self.horizon_mult * ng_for(self.L))))

    def circuit_seed(self, index: int) -> int:
        return circuit_seed(self.seed, index)

    def header(self) -> dict:
        return asdict(self)


@dataclass
class TrajectoryRecord:
    circuit_id: int
    entropy: np.ndarray
    purification_time: int | None
    n_measurements: int

    def to_dict(self) -> dict:
        return {
            "circuit": self.circuit_id,
            "purification_time": self.purification_time,
            "measurements": self.n_measurements,
            "entropy": [int(s) for s in self.entropy],
        }


def _first_zero(entropy: np.ndarray) -> int | None:
    hits = np.flatnonzero(entropy == 0)
    return int(hits[0]) if hits.size else None


def run_trajectory(c: Circuit, rng: np.random.Generator, circuit_id: int = 0, by_rank: bool = False) -> TrajectoryRecord:
    """One random branch of the direct form, reference entropy after every step.

    ``by_rank`` computes the entropy by GF(2) rank instead of the
    single-qubit shortcut.
    """
    d = direct_form(c)
    t = Tableau(c.L + 1)
    ref = c.reference
    ent = t.entropy_by_rank if by_rank else t.entropy
    lo, hi = d.segments["evolution"]
    for op in d.ops[:lo]:
        apply_op(t, op)
    entropy = [ent([ref])]
    started = False
    m = 0
    for op in d.ops[lo:hi]:
        if isinstance(op, XX):
            if started:
                entropy.append(ent([ref]))
            started = True
        apply_op(t, op, rng)
        if isinstance(op, MeasureDirect):
            m += 1
    if started:
        entropy.append(ent([ref]))
    else:
        entropy[0] = ent([ref])
    arr = np.array(entropy, dtype=np.uint8)
    return TrajectoryRecord(circuit_id, arr, _first_zero(arr), m)


def simulate_trajectory(
    L: int,
    p: float,
    px: float,
    seed: int,
    n_gates: int | None = None,
    branch: int = 0,
    stop_when_pure: bool = True,
    circuit_id: int = 0,
) -> TrajectoryRecord:
    """Fused generation and simulation on the stabilizer backend.

    Uses the same random streams as :func:`generate_circuit`, so the first
    ``ng_for(L)`` steps follow the generated circuit exactly.  Once the
    reference is pure it stays pure, so with ``stop_when_pure`` the rest of
    the series is filled with zeros without simulating it.
    """
    T = ng_for(L) if n_gates is None else int(n_gates)
    streams = circuit_streams(seed, branch)
    live = Tableau(L + 1)
    prep = build_bell_prep(L, streams.prep) + build_scrambler(L, streams.prep)
    for op in prep:
        apply_op(live, op)
    entropy = np.zeros(T + 1, dtype=np.int64)
    log = evolve(live, L, p, px, streams.gates.random((T, 5)), streams.outcomes.random(T),
                 MeasurementPolicy(L), entropy, stop_when_pure)
    arr = entropy.astype(np.uint8)
    return TrajectoryRecord(circuit_id, arr, _first_zero(arr), log.n_measurements)


@dataclass
class EnsembleCurve:
    L: int
    p: float
    px: float
    n_circuits: int
    mean: np.ndarray
    stderr: np.ndarray
    purification_times: np.ndarray
    records: list[TrajectoryRecord] = field(default_factory=list, repr=False)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.mean.size)


def _trajectory_task(config: EnsembleConfig, index: int) -> list[TrajectoryRecord]:
    seed = config.circuit_seed(index)
    return [
        simulate_trajectory(config.L, config.p, config.px, seed, config.n_gates, b, True, index)
        for b in range(config.branches)
    ]


def curve_from_entropy(config: EnsembleConfig, per_circuit: np.ndarray, times: np.ndarray,
                       records: list[TrajectoryRecord] | None = None) -> EnsembleCurve:
    n = per_circuit.shape[0]
    if n == 0:
        T = config.n_gates
        return EnsembleCurve(config.L, config.p, config.px, 0, np.full(T + 1, np.nan),
                             np.full(T + 1, np.nan), times, records or [])
    mean = per_circuit.mean(axis=0)
    stderr = per_circuit.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return EnsembleCurve(config.L, config.p, config.px, n, mean, stderr, times, records or [])


def run_ensemble(config: EnsembleConfig, threads: int = 1, keep_records: bool = False) -> EnsembleCurve:
    """Mean and standard error of the reference entropy over the ensemble.

    With ``branches > 1`` each circuit's entropy is first averaged over that
    many independent outcome streams.  Purification times are -1 for
    circuits that never purify (first branch).
    """
    per = pmap(partial(_trajectory_task, config), range(config.n_circuits), threads)
    T = config.n_gates
    entropy = np.array([np.mean([r.entropy for r in recs], axis=0) for recs in per]).reshape(-1, T + 1)
    times = np.array([-1 if recs[0].purification_time is None else recs[0].purification_time for recs in per],
                     dtype=np.int64)
    records = [r for recs in per for r in recs] if keep_records else None
    return curve_from_entropy(config, entropy, times, records)


# ---- shots, thresholding and post-selection ------------------------------


@dataclass
class ThresholdedResult:
    sc: np.ndarray
    threshold: float
    purifies: np.ndarray
    n_measurements: np.ndarray
    retained: np.ndarray | None = None

    @property
    def sct(self) -> np.ndarray:
        return (self.sc > self.threshold).astype(np.uint8)

    @property
    def mean(self) -> float:
        return float(self.sct.mean()) if self.sct.size else float("nan")

    @property
    def sc_mean(self) -> float:
        return float(self.sc.mean()) if self.sc.size else float("nan")


@dataclass(frozen=True)
class MitigationPlan:
    """Post-selection data from the noiseless simulation.

    ``align`` rotates every qubit that is deterministic in X or Y onto Z.
    ``checked`` lists the qubits whose (aligned) Z value is fixed given the
    ancilla record; ``expected`` maps each reachable record to those values.
    The reference is never checked.
    """

    align: tuple[Align, ...]
    checked: tuple[int, ...]
    expected: dict

    def apply(self, c: Circuit) -> Circuit:
        return c.with_ops(c.ops + list(self.align), c.segments)


def mitigation_plan(c: Circuit) -> MitigationPlan:
    if not c.is_deferred:
        raise ValueError("mitigation works on the deferred form")
    branches = enumerate_deferred(c)
    probe = branches[0].state
    align = []
    candidates = []
    for q in range(c.L):
        basis = reference_basis(probe, q)
        if basis is None:
            continue
        candidates.append(q)
        if basis != Basis.Z:
            align.append(Align(q, basis))
    expected = {}
    for br in branches:
        st = br.state.copy()
        for op in align:
            apply_op(st, op)
        vals = []
        for q in candidates:
            out, det = st.measure(q, Basis.Z)
            if not det:
                raise RuntimeError(f"qubit {q} lost determinism on record {br.record}")
            vals.append(out)
        expected[br.record] = tuple(vals)
    return MitigationPlan(tuple(align), tuple(candidates), expected)


@dataclass
class MitigationStats:
    """Retained counts per (basis, record) and the retained fraction n."""

    total: int
    retained: dict = field(default_factory=dict)
    bases: tuple[str, ...] = ("Z",)

    @property
    def n(self) -> float:
        if self.total == 0:
            return float("nan")
        per_basis = [sum(v for (b, _), v in self.retained.items() if b == basis) / self.total
                     for basis in self.bases]
        return float(np.mean(per_basis))


def mitigate_shots(c: Circuit, shots: np.ndarray, plan: MitigationPlan, basis: str = "Z"):
    """Drop shots whose checked qubits disagree with the noiseless expectation.

    ``c`` is the circuit the shots came from (already aligned by ``plan``);
    ``shots`` is (N, n_qubits) of readout bits.  Records that are
    unreachable without noise are dropped too.
    """
    shots = np.asarray(shots, dtype=np.uint8)
    anc = c.ancillae
    keep = np.zeros(shots.shape[0], dtype=bool)
    retained: dict = {}
    checked = list(plan.checked)
    for i, row in enumerate(shots):
        rec = tuple(int(b) for b in row[anc])
        exp = plan.expected.get(rec)
        if exp is None:
            continue
        if all(int(row[q]) == v for q, v in zip(checked, exp)):
            keep[i] = True
            retained[(basis, rec)] = retained.get((basis, rec), 0) + 1
    return shots[keep], MitigationStats(shots.shape[0], retained, (basis,))


def _shot_bits(c: Circuit, noise: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    return np.array([s.bits for s in run_noisy_circuit(c, noise, rng)], dtype=np.uint8).reshape(noise.shots, -1)


def _shot_task(config: EnsembleConfig, noise: NoiseParams, mitigate: bool, index: int):
    seed = config.circuit_seed(index)
    c = generate_circuit(config.L, config.p, config.px, seed)
    rng = stream(seed, SHOTS)
    retained = None
    if mitigate:
        plan = mitigation_plan(c)
        c = plan.apply(c)
        bits = _shot_bits(c, noise, rng)
        kept, stats = mitigate_shots(c, bits, plan)
        retained = stats.n
        bits = kept
    else:
        bits = _shot_bits(c, noise, rng)
    ref_bits = bits[:, c.reference]
    sc = binary_entropy(float(np.mean(ref_bits == 0))) if ref_bits.size else float("nan")
    return sc, "feedback" in c.segments, c.n_ancillae, retained


def run_shot_ensemble(
    config: EnsembleConfig,
    noise: NoiseParams,
    threshold: float = DEFAULT_THRESHOLD,
    threads: int = 1,
    mitigate: bool = False,
) -> ThresholdedResult:
    """S_C per circuit from terminal Z readout of the feedback-appended circuit."""
    rows = pmap(partial(_shot_task, config, noise, mitigate), range(config.n_circuits), threads, chunksize=4)
    sc = np.array([r[0] for r in rows], dtype=float)
    pur = np.array([r[1] for r in rows], dtype=bool)
    m = np.array([r[2] for r in rows], dtype=np.int64)
    ret = np.array([r[3] for r in rows], dtype=float) if mitigate else None
    return ThresholdedResult(sc, float(threshold), pur, m, ret)


def tomography_variants(c: Circuit) -> dict[str, Circuit]:
    """The circuit with the reference rotated to read out X, Y and Z."""
    return {b.name: c.with_ops(c.ops + [Align(c.reference, b)], c.segments) for b in (Basis.X, Basis.Y, Basis.Z)}


@dataclass
class TomographyResult:
    entropy: dict
    counts: dict
    excluded: list
    stats: MitigationStats | None = None


def bloch_entropy(r: np.ndarray) -> float:
    """Von Neumann entropy of (I + r.sigma)/2, with |r| clamped to 1."""
    norm = min(float(np.linalg.norm(r)), 1.0)
    return binary_entropy((1 + norm) / 2)


def tomography_entropy(
    c: Circuit,
    shots: int = TOMOGRAPHY_SHOTS,
    rng: np.random.Generator | None = None,
    noise: NoiseParams | None = None,
    mitigate: bool = False,
) -> TomographyResult:
    """Reference entropy per ancilla record from X/Y/Z readout statistics."""
    if "feedback" in c.segments:
        raise ValueError("tomography runs on circuits without feedback")
    rng = np.random.default_rng(0) if rng is None else rng
    noise = NoiseParams() if noise is None else noise
    noise = NoiseParams(noise.epsilon, noise.dephasing, shots, noise.neighbors)
    plan = mitigation_plan(c) if mitigate else None
    base = plan.apply(c) if plan else c
    anc = c.ancillae
    ref = c.reference
    sums: dict = {}
    counts: dict = {}
    retained: dict = {}
    for name, variant in tomography_variants(base).items():
        bits = _shot_bits(variant, noise, rng)
        if plan is not None:
            bits, st = mitigate_shots(variant, bits, plan, name)
            retained.update(st.retained)
        for row in bits:
            rec = tuple(int(b) for b in row[anc])
            key = (name, rec)
            counts[key] = counts.get(key, 0) + 1
            sums[key] = sums.get(key, 0) + (1 - 2 * int(row[ref]))
    records = sorted({rec for (_, rec) in counts})
    entropy = {}
    excluded = []
    for rec in records:
        if any(counts.get((b, rec), 0) == 0 for b in "XYZ"):
            excluded.append(rec)
            continue
        r = np.array([sums[(b, rec)] / counts[(b, rec)] for b in "XYZ"])
        entropy[rec] = bloch_entropy(r)
    stats = MitigationStats(shots, retained, ("X", "Y", "Z")) if plan else None
    return TomographyResult(entropy, counts, excluded, stats)


def retained_fraction_by_depth(
    c: Circuit,
    noise: NoiseParams,
    rng: np.random.Generator,
    steps: list[int] | None = None,
) -> np.ndarray:
    """Retained fraction n of the three tomography circuits truncated after each step."""
    steps = list(range(c.n_steps + 1)) if steps is None else steps
    out = []
    for t in steps:
        cut = truncate_evolution(c, t)
        plan = mitigation_plan(cut)
        base = plan.apply(cut)
        retained: dict = {}
        for name, variant in tomography_variants(base).items():
            _, st = mitigate_shots(variant, _shot_bits(variant, noise, rng), plan, name)
            retained.update(st.retained)
        out.append(MitigationStats(noise.shots, retained, ("X", "Y", "Z")).n)
    return np.array(out)


def calibrate_threshold(sc: np.ndarray, seed: int = 0) -> float:
    """Intersection of a two-component Gaussian mixture fitted to S_C values.

    Returns the point between the two means where the weighted densities
    are equal.
    """
    from sklearn.mixture import GaussianMixture

    x = np.asarray(sc, dtype=float).reshape(-1, 1)
    if x.shape[0] < 2:
        raise ValueError("need at least two S_C values")
    gm = GaussianMixture(2, random_state=seed, reg_covar=1e-6).fit(x)
    order = np.argsort(gm.means_.ravel())
    mu = gm.means_.ravel()[order]
    var = gm.covariances_.ravel()[order]
    w = gm.weights_[order]
    grid = np.linspace(mu[0], mu[1], 20001)

    def logpdf(i):
        return np.log(w[i]) - 0.5 * np.log(2 * np.pi * var[i]) - (grid - mu[i]) ** 2 / (2 * var[i])

    diff = logpdf(0) - logpdf(1)
    sign = np.flatnonzero(np.diff(np.sign(diff)) != 0)
    if sign.size == 0:
        return float(0.5 * (mu[0] + mu[1]))
    i = sign[0]
    # linear interpolation of the sign change
    x0, x1, d0, d1 = grid[i], grid[i + 1], diff[i], diff[i + 1]
    return float(x0 - d0 * (x1 - x0) / (d1 - d0))


# ---- output ----------------------------------------------------------------


def header_line(header: dict) -> str:
    return "# " + json.dumps(header, sort_keys=True)


def trajectories_jsonl(header: dict, records: list[TrajectoryRecord]) -> str:
    lines = [json.dumps({"config": header}, sort_keys=True)]
    lines += [json.dumps(r.to_dict(), sort_keys=True) for r in records]
    return "\n".join(lines) + "\n"


def curve_csv(header: dict, curve: EnsembleCurve) -> str:
    buf = io.StringIO()
    buf.write(header_line(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mean", "stderr"])
    for t, m, s in zip(curve.t, curve.mean, curve.stderr):
        w.writerow([int(t), repr(float(m)), repr(float(s))])
    return buf.getvalue()


def read_curve_csv(text: str) -> tuple[dict, np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`curve_csv`: (header, t, mean, stderr)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing config header line")
    header = json.loads(lines[0][2:])
    rows = list(csv.reader(lines[1:]))
    if not rows or rows[0] != ["t", "mean", "stderr"]:
        raise ValueError("expected columns t,mean,stderr")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, 3)
    return header, data[:, 0], data[:, 1], data[:, 2]
