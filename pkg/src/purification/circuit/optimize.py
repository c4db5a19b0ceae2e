"""Peephole merging of single-qubit Cliffords."""

from __future__ import annotations

from ..stabilizer.cliffords import IDENTITY, MULTIPLY
from .ops import Circuit, Clifford1q, GateOp


def merge_single_qubit(ops: list[GateOp]) -> list[GateOp]:
    """Fuse runs of Clifford1q on the same qubit that are adjacent in the list."""
    out: list[GateOp] = []
    for op in ops:
        if isinstance(op, Clifford1q) and out and isinstance(out[-1], Clifford1q) and out[-1].q == op.q:
            out[-1] = Clifford1q(op.q, int(MULTIPLY[out[-1].idx, op.idx]))
        else:
            out.append(op)
    return [op for op in out if not (isinstance(op, Clifford1q) and op.idx == IDENTITY)]


def optimize_circuit(c: Circuit) -> Circuit:
    """Merge within each segment; segment offsets shift accordingly."""
    bounds = sorted(c.segments.items(), key=lambda kv: kv[1])
    ops: list[GateOp] = []
    segs: dict[str, tuple[int, int]] = {}
    pos = 0
    for name, (lo, hi) in bounds:
        if lo > pos:
            ops.extend(merge_single_qubit(c.ops[pos:lo]))
        merged = merge_single_qubit(c.ops[lo:hi])
        segs[name] = (len(ops), len(ops) + len(merged))
        ops.extend(merged)
        pos = hi
    ops.extend(merge_single_qubit(c.ops[pos:]))
    return c.with_ops(ops, {k: segs[k] for k in c.segments})
