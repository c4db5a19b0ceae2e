"""Dense statevector simulation: brute-force oracle and noisy shot engine.

Amplitude index bit ``q`` is qubit ``q`` (little-endian).  The gate methods mirror
:class:`~purification.stabilizer.Tableau`, so the circuit executors drive
either backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .circuit.execute import apply_op
from .circuit.ops import XX, Circuit, GateOp, MeasureDirect
from .stabilizer import Basis, PauliString, Tableau, clifford_matrix

MAX_QUBITS = 24

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_SDG = np.diag([1, -1j])
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1.0 + 0j, -1.0])


class QubitBudgetError(ValueError):
    pass


def _check_budget(n: int) -> None:
    if n > MAX_QUBITS:
        raise QubitBudgetError(f"{n} qubits exceed the dense limit of {MAX_QUBITS}")


@dataclass(frozen=True)
class Unitary1q:
    q: int
    matrix: np.ndarray = field(compare=False)


@dataclass(frozen=True)
class XXRotation:
    """exp(-i theta X_a X_b)."""

    a: int
    b: int
    theta: float


@dataclass(frozen=True)
class ZGate:
    q: int


class StateVector:
    """Pure state of ``n`` qubits as 2**n complex amplitudes."""

    def __init__(self, n: int, amplitudes: np.ndarray | None = None):
        if n < 1:
            raise ValueError("need at least one qubit")
        _check_budget(n)
        self.n = n
        if amplitudes is None:
            self.psi = np.zeros(2**n, dtype=complex)
            self.psi[0] = 1.0
        else:
            amplitudes = np.asarray(amplitudes, dtype=complex)
            if amplitudes.shape != (2**n,):
                raise ValueError(f"expected {2**n} amplitudes, got {amplitudes.shape}")
            self.psi = amplitudes.copy()
        self._idx = np.arange(2**n)

    def copy(self) -> "StateVector":
        return StateVector(self.n, self.psi)

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def _check(self, *qs: int) -> None:
        for q in qs:
            if not 0 <= q < self.n:
                raise IndexError(f"qubit {q} out of range for {self.n} qubits")

    # ------------------------------------------------------------ gates

    def apply_1q(self, q: int, u: np.ndarray) -> "StateVector":
        self._check(q)
        v = self.psi.reshape(2 ** (self.n - q - 1), 2, 2**q)
        self.psi = np.einsum("ij,ajb->aib", u, v).reshape(-1)
        return self

    def h(self, q):
        return self.apply_1q(q, _H)

    def s(self, q):
        return self.apply_1q(q, _S)

    def sdg(self, q):
        return self.apply_1q(q, _SDG)

    def x(self, q):
        return self.apply_1q(q, _X)

    def z(self, q):
        return self.apply_1q(q, _Z)

    def clifford_1q(self, q: int, idx: int) -> "StateVector":
        return self.apply_1q(q, clifford_matrix(idx))

    def cnot(self, control: int, target: int) -> "StateVector":
        self._check(control, target)
        if control == target:
            raise ValueError("CNOT control and target must differ")
        src = self._idx ^ (((self._idx >> control) & 1) << target)
        self.psi = self.psi[src]
        return self

    def xx(self, a: int, b: int, theta: float) -> "StateVector":
        """Apply exp(-i theta X_a X_b)."""
        self._check(a, b)
        if a == b:
            raise ValueError("XX gate needs two distinct qubits")
        if theta == 0.0:
            return self
        flipped = self.psi[self._idx ^ ((1 << a) | (1 << b))]
        self.psi = np.cos(theta) * self.psi - 1j * np.sin(theta) * flipped
        return self

    def xx_pi4(self, a: int, b: int) -> "StateVector":
        return self.xx(a, b, np.pi / 4)

    def to_z_basis(self, q: int, basis) -> "StateVector":
        basis = Basis.parse(basis)
        if basis == Basis.X:
            self.h(q)
        elif basis == Basis.Y:
            self.sdg(q).h(q)
        return self

    def from_z_basis(self, q: int, basis) -> "StateVector":
        basis = Basis.parse(basis)
        if basis == Basis.X:
            self.h(q)
        elif basis == Basis.Y:
            self.h(q).s(q)
        return self

    # ------------------------------------------------------------ observables

    def apply_pauli(self, pauli: PauliString) -> np.ndarray:
        """Return P|psi> as a new amplitude array."""
        pauli = pauli.padded(self.n)
        xm = sum(1 << q for q in range(self.n) if pauli.x[q])
        zm = sum(1 << q for q in range(self.n) if pauli.z[q])
        ny = sum(a & b for a, b in zip(pauli.x, pauli.z))
        parity = np.bitwise_count(self._idx & zm) & 1
        vals = pauli.sign * (1j**ny) * np.where(parity, -1.0, 1.0) * self.psi
        out = np.empty_like(self.psi)
        out[self._idx ^ xm] = vals
        return out

    def expectation(self, pauli: PauliString | str) -> float:
        if isinstance(pauli, str):
            pauli = PauliString.from_str(pauli)
        return float(np.real(np.vdot(self.psi, self.apply_pauli(pauli))))

    def probability_one(self, q: int) -> float:
        self._check(q)
        mask = ((self._idx >> q) & 1).astype(bool)
        return float(np.sum(np.abs(self.psi[mask]) ** 2))

    def bloch(self, q: int) -> np.ndarray:
        """Reduced single-qubit Bloch vector (<X>, <Y>, <Z>)."""
        self._check(q)
        v = self.psi.reshape(2 ** (self.n - q - 1), 2, 2**q)
        a0 = v[:, 0, :]
        a1 = v[:, 1, :]
        rho01 = np.sum(a0 * np.conj(a1))
        return np.array(
            [2 * rho01.real, -2 * rho01.imag, np.sum(np.abs(a0) ** 2) - np.sum(np.abs(a1) ** 2)]
        )

    def measure(self, q: int, basis=Basis.Z, rng: np.random.Generator | None = None, force: int | None = None):
        """Born-rule measurement; returns ``(outcome, deterministic)``."""
        self._check(q)
        basis = Basis.parse(basis)
        self.to_z_basis(q, basis)
        p1 = self.probability_one(q)
        deterministic = p1 < 1e-12 or p1 > 1 - 1e-12
        if force is not None:
            out = int(force)
        elif deterministic:
            out = int(p1 > 0.5)
        elif rng is not None:
            out = int(rng.random() < p1)
        else:
            raise ValueError("random measurement needs an rng or a forced outcome")
        prob = p1 if out else 1 - p1
        if prob < 1e-12:
            raise ValueError(f"outcome {out} on qubit {q} has zero probability")
        keep = ((self._idx >> q) & 1) == out
        self.psi = np.where(keep, self.psi, 0) / np.sqrt(prob)
        self.from_z_basis(q, basis)
        return out, deterministic


def apply_gate_dense(s: StateVector, g) -> StateVector:
    """Apply a circuit op, :class:`Unitary1q`, :class:`XXRotation` or :class:`ZGate` in place."""
    if isinstance(g, Unitary1q):
        return s.apply_1q(g.q, np.asarray(g.matrix, dtype=complex))
    if isinstance(g, XXRotation):
        return s.xx(g.a, g.b, g.theta)
    if isinstance(g, ZGate):
        return s.z(g.q)
    if isinstance(g, MeasureDirect):
        raise ValueError("use measure_dense for measurements")
    apply_op(s, g)
    return s


def measure_dense(s: StateVector, q: int, basis, rng: np.random.Generator):
    """Measure in ``basis``; returns ``(outcome, post_state)`` (the state is updated in place)."""
    out, _ = s.measure(q, basis, rng=rng)
    return out, s


def tableau_to_statevector(t: Tableau) -> StateVector:
    """Dense vector stabilized by every generator of ``t`` (global phase fixed).

    Starts from a fixed pseudo-random vector, applies each projector
    (I + g)/2, and normalizes; the overlap with the stabilizer state is
    nonzero with probability one.
    """
    _check_budget(t.n)
    rng = np.random.default_rng(12345)
    s = StateVector(t.n, rng.normal(size=2**t.n) + 1j * rng.normal(size=2**t.n))
    for g in t.stabilizers():
        s.psi = 0.5 * (s.psi + s.apply_pauli(g))
        s.psi /= np.linalg.norm(s.psi)
    # first amplitude of maximal magnitude made real and positive
    mag = np.abs(s.psi)
    k = int(np.flatnonzero(mag > mag.max() - 1e-9)[0])
    s.psi *= mag[k] / s.psi[k]
    return s


# ---------------------------------------------------------------- noise and shots


@dataclass(frozen=True)
class NoiseParams:
    """Trajectory noise attached to every XX(pi/4) gate.

    After an XX on ``(a, b)`` each spectator ``k`` in ``neighbors[a]`` gets a
    spurious ``XX(epsilon * pi/4)`` on ``(a, k)`` (same for ``b``), then each
    gate qubit is hit by Z with probability ``dephasing``.  ``neighbors=None``
    means chain-adjacent indices.
    """

    epsilon: float = 0.0
    dephasing: float = 0.0
    shots: int = 1000
    neighbors: Mapping[int, tuple[int, ...]] | None = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("crosstalk fraction must be non-negative")
        if not 0 <= self.dephasing <= 1:
            raise ValueError("dephasing probability must lie in [0, 1]")
        if self.shots < 1:
            raise ValueError("need at least one shot")

    def spectators(self, q: int, n: int) -> tuple[int, ...]:
        if self.neighbors is not None:
            return tuple(k for k in self.neighbors.get(q, ()) if 0 <= k < n)
        return tuple(k for k in (q - 1, q + 1) if 0 <= k < n)


DEFAULT_EPSILON = 0.03


@dataclass
class ShotRecord:
    bits: np.ndarray
    reference: int

    @property
    def reference_bit(self) -> int:
        return int(self.bits[self.reference])


def _noisy_final_state(c: Circuit, noise: NoiseParams, flips: np.ndarray | None) -> StateVector:
    s = StateVector(c.n_qubits)
    theta = noise.epsilon * np.pi / 4
    k = 0
    for op in c.ops:
        apply_op(s, op)
        if not isinstance(op, XX):
            continue
        if noise.epsilon > 0:
            for g in (op.a, op.b):
                other = op.b if g == op.a else op.a
                for spec in noise.spectators(g, c.n_qubits):
                    if spec != other:
                        s.xx(g, spec, theta)
        if flips is not None:
            if flips[k]:
                s.z(op.a)
            if flips[k + 1]:
                s.z(op.b)
        k += 2
    return s


def _sample_bits(s: StateVector, count: int, rng: np.random.Generator) -> np.ndarray:
    probs = np.abs(s.psi) ** 2
    probs /= probs.sum()
    idx = rng.choice(probs.size, size=count, p=probs)
    return ((idx[:, None] >> np.arange(s.n)) & 1).astype(np.uint8)


def run_noisy_circuit(c: Circuit, noise: NoiseParams, rng: np.random.Generator) -> list[ShotRecord]:
    """Sample ``noise.shots`` terminal Z readouts of every qubit.

    Each shot is an independent trajectory; shots that draw the same
    dephasing pattern share one statevector run.
    """
    if not c.is_deferred:
        raise ValueError("noisy runs need the deferred-measurement form")
    _check_budget(c.n_qubits)
    n_xx = c.count(XX)
    bits = np.empty((noise.shots, c.n_qubits), dtype=np.uint8)
    if noise.dephasing == 0 or n_xx == 0:
        s = _noisy_final_state(c, noise, None)
        bits[:] = _sample_bits(s, noise.shots, rng)
    else:
        pattern = rng.random((noise.shots, 2 * n_xx)) < noise.dephasing
        uniq, inverse = np.unique(pattern, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        for u in range(uniq.shape[0]):
            rows = np.flatnonzero(inverse == u)
            s = _noisy_final_state(c, noise, uniq[u])
            bits[rows] = _sample_bits(s, rows.size, rng)
    return [ShotRecord(b, c.reference) for b in bits]


def final_state(c: Circuit, noise: NoiseParams | None = None) -> StateVector:
    """Noiseless (or coherent-crosstalk only) final state of a deferred circuit."""
    if not c.is_deferred:
        raise ValueError("dense execution needs the deferred-measurement form")
    return _noisy_final_state(c, noise or NoiseParams(), None)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def classical_entropy(shots: Iterable[ShotRecord] | np.ndarray, reference: int | None = None) -> float:
    """Binary entropy of the empirical reference-bit distribution."""
    if isinstance(shots, np.ndarray):
        ref_bits = shots
    else:
        shots = list(shots)
        if not shots:
            raise ValueError("no shots")
        ref = shots[0].reference if reference is None else reference
        ref_bits = np.array([sh.bits[ref] for sh in shots])
    if ref_bits.size == 0:
        raise ValueError("no shots")
    return binary_entropy(float(np.mean(ref_bits == 0)))


def record_distribution(c: Circuit, qubits: list[int] | None = None) -> dict[tuple[int, ...], tuple[float, np.ndarray]]:
    """Exact ``record -> (probability, reference Bloch vector)`` of a deferred circuit.

    ``qubits`` (default: the ancillae) are read out in Z; records with
    probability below 1e-14 are dropped.
    """
    s = final_state(c)
    qubits = c.ancillae if qubits is None else list(qubits)
    ref = c.reference
    out = {}
    amps = s.psi
    idx = s._idx
    for r in range(2 ** len(qubits)):
        rec = tuple((r >> k) & 1 for k in range(len(qubits)))
        keep = np.ones(idx.size, dtype=bool)
        for q, b in zip(qubits, rec):
            keep &= ((idx >> q) & 1) == b
        prob = float(np.sum(np.abs(amps[keep]) ** 2))
        if prob < 1e-14:
            continue
        cond = StateVector(s.n, np.where(keep, amps, 0) / np.sqrt(prob))
        out[rec] = (prob, cond.bloch(ref))
    return out
