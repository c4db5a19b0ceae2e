"""Line-oriented text format for circuits.

Example::

    # purification circuit v1
    L 4
    p 0.15
    px 1.0
    seed 7
    ancillae 1
    steps 8
    segment bell 0 2
    ...
    ops
    C1 4 1
    CNOT 4 2
    XX 0 3
    MX 3 5
    ALIGN 4 X

Direct measurements are written ``MZ q`` (no ancilla column); deferred ones
``MZ q a``.  Floats use ``repr`` so that printing and parsing round-trip.
"""

from __future__ import annotations

from ..stabilizer.pauli import Basis
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

MAGIC = "# purification circuit v1"


class CircuitFormatError(ValueError):
    pass


def format_op(op: GateOp) -> str:
    if isinstance(op, XX):
        return f"XX {op.a} {op.b}"
    if isinstance(op, Clifford1q):
        return f"C1 {op.q} {op.idx}"
    if isinstance(op, CNOT):
        return f"CNOT {op.control} {op.target}"
    if isinstance(op, MeasureDirect):
        return f"M{op.basis.name} {op.q}"
    if isinstance(op, DeferredMeasure):
        return f"M{op.basis.name} {op.q} {op.ancilla}"
    if isinstance(op, XGate):
        return f"X {op.q}"
    if isinstance(op, Align):
        return f"ALIGN {op.q} {op.basis.name}"
    raise TypeError(f"cannot serialize {op!r}")


def parse_op(line: str) -> GateOp:
    parts = line.split()
    if not parts:
        raise CircuitFormatError("empty op line")
    name, args = parts[0], parts[1:]
    try:
        if name == "XX" and len(args) == 2:
            return XX(int(args[0]), int(args[1]))
        if name == "C1" and len(args) == 2:
            return Clifford1q(int(args[0]), int(args[1]))
        if name == "CNOT" and len(args) == 2:
            return CNOT(int(args[0]), int(args[1]))
        if name in ("MX", "MY", "MZ"):
            basis = Basis[name[1]]
            if len(args) == 1:
                return MeasureDirect(int(args[0]), basis)
            if len(args) == 2:
                return DeferredMeasure(int(args[0]), int(args[1]), basis)
        if name == "X" and len(args) == 1:
            return XGate(int(args[0]))
        if name == "ALIGN" and len(args) == 2:
            return Align(int(args[0]), Basis.parse(args[1]))
    except (ValueError, KeyError) as exc:
        raise CircuitFormatError(f"bad op line {line!r}: {exc}") from None
    raise CircuitFormatError(f"unknown op line {line!r}")


def dumps(c: Circuit) -> str:
    lines = [
        MAGIC,
        f"L {c.L}",
        f"p {c.p!r}",
        f"px {c.px!r}",
        f"seed {'none' if c.seed is None else c.seed}",
        f"ancillae {c.n_ancillae}",
        f"steps {c.n_steps}",
    ]
    for name, (lo, hi) in c.segments.items():
        lines.append(f"segment {name} {lo} {hi}")
    lines.append("ops")
    lines.extend(format_op(op) for op in c.ops)
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise CircuitFormatError("missing circuit header line")
    header: dict[str, str] = {}
    segments: dict[str, tuple[int, int]] = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "ops":
        parts = lines[i].split()
        i += 1
        if not parts:
            continue
        if parts[0] == "segment":
            if len(parts) != 4:
                raise CircuitFormatError(f"bad segment line {lines[i - 1]!r}")
            segments[parts[1]] = (int(parts[2]), int(parts[3]))
        elif len(parts) == 2:
            header[parts[0]] = parts[1]
        else:
            raise CircuitFormatError(f"bad header line {lines[i - 1]!r}")
    if i == len(lines):
        raise CircuitFormatError("missing 'ops' line")
    ops = [parse_op(line) for line in lines[i + 1 :] if line.strip()]
    try:
        seed = header.get("seed", "none")
        c = Circuit(
            L=int(header["L"]),
            ops=ops,
            p=float(header.get("p", 0.0)),
            px=float(header.get("px", 0.0)),
            seed=None if seed == "none" else int(seed),
            n_ancillae=int(header.get("ancillae", 0)),
            segments=segments,
            n_steps=int(header.get("steps", 0)),
        )
    except (KeyError, ValueError) as exc:
        raise CircuitFormatError(f"bad circuit header: {exc}") from None
    for name, (lo, hi) in segments.items():
        if not 0 <= lo <= hi <= len(ops):
            raise CircuitFormatError(f"segment {name} [{lo}, {hi}) outside the op list")
    return c
