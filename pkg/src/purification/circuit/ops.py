"""Gate operations and the :class:`Circuit` container.

Qubit layout: system qubits ``0..L-1``, the reference at ``L``, measurement
ancillae from ``L+1`` upward in the order their measurements occur.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

from ..stabilizer.pauli import Basis


@dataclass(frozen=True)
class Clifford1q:
    q: int
    idx: int


@dataclass(frozen=True)
class XX:
    """XX(pi/4) = exp(-i pi/4 X_a X_b)."""

    a: int
    b: int


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int


@dataclass(frozen=True)
class MeasureDirect:
    q: int
    basis: Basis


@dataclass(frozen=True)
class DeferredMeasure:
    """Rotate ``q`` to Z, copy it onto ``ancilla`` with a CNOT, rotate back."""

    q: int
    ancilla: int
    basis: Basis


@dataclass(frozen=True)
class XGate:
    q: int


@dataclass(frozen=True)
class Align:
    """Rotation taking ``basis`` eigenstates to the matching Z eigenstates."""

    q: int
    basis: Basis


GateOp = Union[Clifford1q, XX, CNOT, MeasureDirect, DeferredMeasure, XGate, Align]
MEASUREMENTS = (MeasureDirect, DeferredMeasure)

SEGMENTS = ("bell", "scrambler", "evolution", "feedback")


def op_qubits(op: GateOp) -> tuple[int, ...]:
    if isinstance(op, (Clifford1q, MeasureDirect, XGate, Align)):
        return (op.q,)
    if isinstance(op, XX):
        return (op.a, op.b)
    if isinstance(op, CNOT):
        return (op.control, op.target)
    if isinstance(op, DeferredMeasure):
        return (op.q, op.ancilla)
    raise TypeError(f"not a gate op: {op!r}")


def ng_for(L: int) -> int:
    """Evolution gate budget floor(L * sqrt(L))."""
    if L < 2:
        raise ValueError(f"system size must be at least 2, got {L}")
    # isqrt keeps this exact: floor(L^1.5) = isqrt(L^3)
    return math.isqrt(L**3)


@dataclass
class Circuit:
    """Ordered gate/measurement program plus generation metadata.

    ``segments`` maps a segment name to its ``[start, stop)`` slice of
    ``ops``.
    """

    L: int
    ops: list[GateOp]
    p: float = 0.0
    px: float = 0.0
    seed: int | None = None
    n_ancillae: int = 0
    segments: dict[str, tuple[int, int]] = field(default_factory=dict)
    n_steps: int = 0

    @property
    def reference(self) -> int:
        return self.L

    @property
    def ancillae(self) -> list[int]:
        return list(range(self.L + 1, self.L + 1 + self.n_ancillae))

    @property
    def n_qubits(self) -> int:
        return self.L + 1 + self.n_ancillae

    def segment(self, name: str) -> list[GateOp]:
        if name not in self.segments:
            return []
        lo, hi = self.segments[name]
        return self.ops[lo:hi]

    @property
    def measurements(self) -> list[GateOp]:
        return [op for op in self.ops if isinstance(op, MEASUREMENTS)]

    @property
    def n_measurements(self) -> int:
        return len(self.measurements)

    @property
    def is_deferred(self) -> bool:
        return not any(isinstance(op, MeasureDirect) for op in self.ops)

    def count(self, kind: type) -> int:
        return sum(isinstance(op, kind) for op in self.ops)

    def with_ops(self, ops: list[GateOp], segments: dict[str, tuple[int, int]], **kw) -> "Circuit":
        return replace(self, ops=list(ops), segments=dict(segments), **kw)

    def validate(self) -> None:
        """Raise ValueError on out-of-range qubits or reused ancillae."""
        seen: set[int] = set()
        for op in self.ops:
            for q in op_qubits(op):
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"{op} touches qubit {q} outside 0..{self.n_qubits - 1}")
            if isinstance(op, DeferredMeasure):
                if op.ancilla in seen:
                    raise ValueError(f"ancilla {op.ancilla} used by two measurements")
                if op.ancilla <= self.L:
                    raise ValueError(f"{op} targets a non-ancilla qubit")
                seen.add(op.ancilla)
            if isinstance(op, MEASUREMENTS) and op.q == self.reference:
                raise ValueError("the reference qubit is never measured mid-circuit")
        if seen and seen != set(self.ancillae):
            raise ValueError("every ancilla must carry exactly one measurement")
        if "evolution" in self.segments:
            n_xx = sum(isinstance(op, XX) for op in self.segment("evolution"))
            if n_xx != self.n_steps:
                raise ValueError(f"evolution holds {n_xx} XX gates, expected {self.n_steps}")


def truncate_evolution(c: Circuit, t: int) -> Circuit:
    """Keep bell prep, scrambler and the first ``t`` evolution steps; drop feedback.

    A step is an XX gate plus the measurement that follows it, if any.
    Ancillae of dropped measurements are removed.
    """
    if "evolution" not in c.segments:
        raise ValueError("circuit has no evolution segment")
    lo, hi = c.segments["evolution"]
    if not 0 <= t <= c.n_steps:
        raise ValueError(f"step {t} outside 0..{c.n_steps}")
    stop = lo
    seen = 0
    for i in range(lo, hi):
        if isinstance(c.ops[i], XX):
            if seen == t:
                break
            seen += 1
        stop = i + 1
    ops = c.ops[:stop]
    n_anc = sum(isinstance(op, DeferredMeasure) for op in ops)
    segs = {k: v for k, v in c.segments.items() if k != "feedback"}
    segs["evolution"] = (lo, stop)
    return c.with_ops(ops, segs, n_ancillae=n_anc, n_steps=t)
