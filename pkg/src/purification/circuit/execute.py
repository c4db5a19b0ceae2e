"""Run circuits on a backend and enumerate measurement branches.

A backend is any object with the gate methods of
:class:`~purification.stabilizer.Tableau` (``clifford_1q``, ``xx_pi4``,
``cnot``, ``x``, ``to_z_basis``, ``from_z_basis``, ``measure``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..stabilizer import Basis, Tableau
from .ops import (
    CNOT,
    XX,
    Align,
    Circuit,
    Clifford1q,
    DeferredMeasure,
    GateOp,
    MeasureDirect,
    XGate,
)

DEFAULT_BRANCH_CAP = 20


class BranchCapExceeded(RuntimeError):
    pass


def apply_op(state: Any, op: GateOp, rng: np.random.Generator | None = None, force: int | None = None):
    """Apply one op.  Returns ``(outcome, deterministic)`` for direct measurements, else None."""
    if isinstance(op, XX):
        state.xx_pi4(op.a, op.b)
    elif isinstance(op, Clifford1q):
        state.clifford_1q(op.q, op.idx)
    elif isinstance(op, CNOT):
        state.cnot(op.control, op.target)
    elif isinstance(op, XGate):
        state.x(op.q)
    elif isinstance(op, Align):
        state.to_z_basis(op.q, op.basis)
    elif isinstance(op, DeferredMeasure):
        state.to_z_basis(op.q, op.basis)
        state.cnot(op.q, op.ancilla)
        state.from_z_basis(op.q, op.basis)
    elif isinstance(op, MeasureDirect):
        return state.measure(op.q, op.basis, rng=rng, force=force)
    else:
        raise TypeError(f"unknown op {op!r}")
    return None


def run(ops: list[GateOp], state: Any, rng: np.random.Generator | None = None) -> list[int]:
    """Apply ``ops`` in order; return the direct-measurement outcomes."""
    record = []
    for op in ops:
        res = apply_op(state, op, rng)
        if res is not None:
            record.append(res[0])
    return record


def direct_form(c: Circuit) -> Circuit:
    """Swap deferred measurements back to direct ones and drop the feedback segment."""
    stop = c.segments["feedback"][0] if "feedback" in c.segments else len(c.ops)
    ops = [
        MeasureDirect(op.q, op.basis) if isinstance(op, DeferredMeasure) else op
        for op in c.ops[:stop]
    ]
    segs = {k: v for k, v in c.segments.items() if k != "feedback"}
    return c.with_ops(ops, segs, n_ancillae=0)


@dataclass
class Branch:
    record: tuple[int, ...]
    probability: float
    state: Tableau


def enumerate_direct(c: Circuit, stop: int | None = None, cap: int = DEFAULT_BRANCH_CAP) -> list[Branch]:
    """All measurement branches of the direct form (ops up to ``stop``)."""
    ops = c.ops[: len(c.ops) if stop is None else stop]
    if sum(isinstance(op, MeasureDirect) for op in ops) > cap:
        raise BranchCapExceeded(f"more than {cap} measurements to enumerate")
    n = max(c.L + 1, c.n_qubits)
    branches = [Branch((), 1.0, Tableau(n))]
    for op in ops:
        if not isinstance(op, MeasureDirect):
            for br in branches:
                apply_op(br.state, op)
            continue
        nxt = []
        for br in branches:
            if br.state.is_deterministic(op.q, op.basis):
                out, _ = br.state.measure(op.q, op.basis)
                nxt.append(Branch(br.record + (out,), br.probability, br.state))
                continue
            other = br.state.copy()
            br.state.measure(op.q, op.basis, force=0)
            other.measure(op.q, op.basis, force=1)
            half = br.probability / 2
            nxt.append(Branch(br.record + (0,), half, br.state))
            nxt.append(Branch(br.record + (1,), half, other))
        branches = nxt
    return branches


def enumerate_deferred(c: Circuit, cap: int = DEFAULT_BRANCH_CAP, qubits: list[int] | None = None) -> list[Branch]:
    """Run the (unitary) deferred circuit, then branch over Z readout of ``qubits``.

    ``qubits`` defaults to the ancillae in measurement order.  Branches with
    zero probability are not produced.
    """
    if not c.is_deferred:
        raise ValueError("circuit still contains direct measurements")
    qubits = c.ancillae if qubits is None else list(qubits)
    if len(qubits) > cap:
        raise BranchCapExceeded(f"{len(qubits)} readout qubits exceed the cap of {cap}")
    t = Tableau(c.n_qubits)
    run(c.ops, t)
    branches = [Branch((), 1.0, t)]
    for q in qubits:
        nxt = []
        for br in branches:
            if br.state.is_deterministic(q, Basis.Z):
                out, _ = br.state.measure(q, Basis.Z)
                nxt.append(Branch(br.record + (out,), br.probability, br.state))
                continue
            other = br.state.copy()
            br.state.measure(q, Basis.Z, force=0)
            other.measure(q, Basis.Z, force=1)
            half = br.probability / 2
            nxt.append(Branch(br.record + (0,), half, br.state))
            nxt.append(Branch(br.record + (1,), half, other))
        branches = nxt
    return branches
