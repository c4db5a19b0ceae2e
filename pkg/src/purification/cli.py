"""Command-line interface.

Every output file starts with the full run configuration so a result can be
regenerated from the file alone.  ``--threads`` only sets the worker count;
it never appears in outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
COMMANDS = ("generate", "trajectories", "shots", "fit", "crossing", "collapse", "phase-diagram")
BACKENDS = ("stabilizer", "statevector")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


@dataclass
class RunConfig:
    """All tunables of a run.  Grids (``L``, ``p``, ``px``) are comma lists."""

    L: str = "6"
    p: str = "0.15"
    px: str = "1.0"
    circuits: int = 300
    seed: int = 0
    backend: str = "stabilizer"
    noise_epsilon: float = 0.0
    dephasing: float = 0.0
    shots: int = 1000
    horizon_mult: float = 1.0
    threshold: float = 0.93
    mitigate: bool = False
    z: float | None = None
    start_below: float = 0.5
    floor: float = 1e-3
    resamples: int = 200
    unit: str = "layers"
    input: str | None = None
    out: str = "out"
    threads: int = 1

    # keys that do not affect results
    NON_RESULT = ("out", "threads", "input")

    @property
    def sizes(self) -> list[int]:
        return _ints(self.L)

    @property
    def ps(self) -> list[float]:
        return _floats(self.p)

    @property
    def pxs(self) -> list[float]:
        return _floats(self.px)

    def validate(self) -> None:
        try:
            sizes, ps, pxs = self.sizes, self.ps, self.pxs
        except ValueError as exc:
            raise UsageError(f"bad number list: {exc}") from None
        if any(L < 2 for L in sizes):
            raise UsageError("--L values must be at least 2")
        for name, vals in (("--p", ps), ("--px", pxs)):
            if any(not 0 <= v <= 1 for v in vals):
                raise UsageError(f"{name} values must lie in [0, 1]")
        if self.circuits < 0:
            raise UsageError("--circuits must be non-negative")
        if self.backend not in BACKENDS:
            raise UsageError(f"--backend must be one of {', '.join(BACKENDS)}")
        if self.noise_epsilon < 0:
            raise UsageError("--noise-epsilon must be non-negative")
        if not 0 <= self.dephasing <= 1:
            raise UsageError("--dephasing must lie in [0, 1]")
        if self.shots < 1:
            raise UsageError("--shots must be at least 1")
        if self.horizon_mult <= 0:
            raise UsageError("--horizon-mult must be positive")
        if not 0 <= self.threshold <= 1:
            raise UsageError("--threshold must lie in [0, 1]")
        if self.threads < 1:
            raise UsageError("--threads must be at least 1")
        if self.unit not in ("layers", "gates"):
            raise UsageError("--unit must be layers or gates")

    def header(self, command: str) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in self.NON_RESULT}
        d["command"] = command
        d["version"] = __version__
        return d

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name.replace('_', '-')} = {'none' if v is None else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> dict:
        """Parse ``key = value`` lines (``#`` comments) into typed overrides."""
        types = {f.name: f.type for f in fields(cls)}
        out = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {n}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise UsageError(f"config line {n}: unknown key {key!r}")
            out[key] = _coerce(key, types[key], val)
        return out


def _coerce(key: str, typ: str, val: str):
    try:
        if val.lower() == "none" and "None" in typ:
            return None
        if typ.startswith("bool"):
            if val.lower() in ("1", "true", "yes", "on"):
                return True
            if val.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(val)
        if typ.startswith("int"):
            return int(val)
        if typ.startswith("float"):
            return float(val)
        return val
    except ValueError:
        raise UsageError(f"bad value for {key}: {val!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="purification", description="Monitored random Clifford circuits and the reference-qubit purification transition.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(sp, *extra):
        sp.add_argument("--config", default=None, help="key = value file; command-line flags win")
        sp.add_argument("--out", default=S, help="output directory")
        sp.add_argument("--threads", type=int, default=S, help="worker processes (outputs do not depend on it)")
        for flag in extra:
            FLAGS[flag](sp)

    FLAGS = {
        "L": lambda sp: sp.add_argument("--L", default=S, help="system size (comma list for scans)"),
        "p": lambda sp: sp.add_argument("--p", default=S, help="measurement probability (comma list for sweeps)"),
        "px": lambda sp: sp.add_argument("--px", default=S, help="X-basis fraction (comma list for scans)"),
        "circuits": lambda sp: sp.add_argument("--circuits", type=int, default=S),
        "seed": lambda sp: sp.add_argument("--seed", type=int, default=S, help="master seed"),
        "backend": lambda sp: sp.add_argument("--backend", choices=BACKENDS, default=S),
        "noise": lambda sp: (
            sp.add_argument("--noise-epsilon", dest="noise_epsilon", type=float, default=S, help="crosstalk fraction"),
            sp.add_argument("--dephasing", type=float, default=S, help="Z-flip probability per XX gate qubit"),
            sp.add_argument("--shots", type=int, default=S),
            sp.add_argument("--threshold", type=float, default=S),
            sp.add_argument("--mitigate", action="store_true", default=S, help="post-select on deterministic qubits"),
        ),
        "horizon": lambda sp: sp.add_argument("--horizon-mult", dest="horizon_mult", type=float, default=S,
                                              help="evolution length in units of floor(L^1.5) gates"),
        "window": lambda sp: (
            sp.add_argument("--start-below", dest="start_below", type=float, default=S),
            sp.add_argument("--floor", type=float, default=S),
        ),
        "scan": lambda sp: (
            sp.add_argument("--resamples", type=int, default=S, help="bootstrap resamples per cell"),
            sp.add_argument("--unit", choices=("layers", "gates"), default=S, help="time unit of tau"),
            sp.add_argument("--z", type=float, default=S, help="fixed dynamical exponent"),
        ),
        "input": lambda sp: sp.add_argument("--input", default=S, help="input file"),
    }
    base = ("L", "p", "px", "circuits", "seed")
    common(sub.add_parser("generate", help="write serialized circuits"), *base)
    common(sub.add_parser("trajectories", help="reference entropy curves"), *base, "backend", "horizon")
    common(sub.add_parser("shots", help="noisy shot sampling and thresholded entropy"), *base, "noise")
    common(sub.add_parser("fit", help="decay fit of an ensemble curve CSV"), "input", "window")
    for name, text in (("crossing", "tau scan and tau/L^z crossing"), ("collapse", "tau scan and data collapse")):
        common(sub.add_parser(name, help=text), *base, "horizon", "window", "scan", "input")
    common(sub.add_parser("phase-diagram", help="critical px for each p"), *base, "horizon", "window", "scan")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.command in ("crossing", "collapse", "phase-diagram"):
        values.update(L="16,32,64", px="0.6,0.65,0.7,0.75,0.8", circuits=2000, horizon_mult=8.0)
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        values.update(RunConfig.from_text(text))
    for f in fields(RunConfig):
        if hasattr(args, f.name):
            values[f.name] = getattr(args, f.name)
    cfg = RunConfig(**{k: (str(v) if k in ("L", "p", "px") else v) for k, v in values.items()})
    cfg.validate()
    return cfg


# ---- output helpers ------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _finite(x: float):
    return x if isinstance(x, (int, float)) and math.isfinite(x) else None


def _single(cfg: RunConfig, what: str, vals: list):
    if len(vals) != 1:
        raise UsageError(f"this command takes a single {what} value")
    return vals[0]


# ---- commands --------------------------------------------------------------------


def cmd_generate(cfg: RunConfig) -> list[Path]:
    from .circuit import dumps, generate_circuit
    from .seeds import circuit_seed

    L = _single(cfg, "--L", cfg.sizes)
    p = _single(cfg, "--p", cfg.ps)
    px = _single(cfg, "--px", cfg.pxs)
    out = Path(cfg.out)
    written = []
    for i in range(cfg.circuits):
        c = generate_circuit(L, p, px, circuit_seed(cfg.seed, i))
        path = out / f"circuit_{i:05d}.txt"
        _write(path, dumps(c))
        written.append(path)
    return written


def _dense_trajectory(L, p, px, seed, index, n_gates):
    from .circuit import XX, apply_op, direct_form, generate_circuit
    from .ensemble import TrajectoryRecord, bloch_entropy
    from .seeds import OUTCOMES, stream
    from .statevector import StateVector

    c = direct_form(generate_circuit(L, p, px, seed, n_gates=n_gates, feedback=False))
    s = StateVector(L + 1)
    rng = stream(seed, OUTCOMES, 1 << 20)
    lo, hi = c.segments["evolution"]
    for op in c.ops[:lo]:
        apply_op(s, op)
    ent = [bloch_entropy(s.bloch(L))]
    started = False
    for op in c.ops[lo:hi]:
        if isinstance(op, XX):
            if started:
                ent.append(bloch_entropy(s.bloch(L)))
            started = True
        apply_op(s, op, rng)
    ent.append(bloch_entropy(s.bloch(L)))
    arr = np.round(np.array(ent), 12)
    hits = np.flatnonzero(arr == 0)
    return TrajectoryRecord(index, arr, int(hits[0]) if hits.size else None, c.n_measurements)


def _dense_task(args):
    return _dense_trajectory(*args)


def cmd_trajectories(cfg: RunConfig) -> list[Path]:
    from .ensemble import EnsembleConfig, _trajectory_task, curve_csv, curve_from_entropy
    from .parallel import pmap
    from functools import partial

    L = _single(cfg, "--L", cfg.sizes)
    p = _single(cfg, "--p", cfg.ps)
    px = _single(cfg, "--px", cfg.pxs)
    ec = EnsembleConfig(L, p, px, cfg.circuits, cfg.seed, cfg.horizon_mult)
    if cfg.backend == "stabilizer":
        records = [r for recs in pmap(partial(_trajectory_task, ec), range(ec.n_circuits), cfg.threads) for r in recs]
    else:
        if L + 1 > 24:
            raise RuntimeError("statevector backend holds at most 24 qubits")
        tasks = [(L, p, px, ec.circuit_seed(i), i, ec.n_gates) for i in range(ec.n_circuits)]
        records = pmap(_dense_task, tasks, cfg.threads, chunksize=2)
    T = ec.n_gates
    ent = np.array([r.entropy for r in records], dtype=float).reshape(-1, T + 1)
    times = np.array([-1 if r.purification_time is None else r.purification_time for r in records], dtype=np.int64)
    curve = curve_from_entropy(ec, ent, times)
    header = cfg.header("trajectories")
    out = Path(cfg.out)
    lines = [json.dumps({"config": header}, sort_keys=True)]
    for r in records:
        d = r.to_dict()
        if cfg.backend == "statevector":
            d["entropy"] = [float(v) for v in r.entropy]
        lines.append(json.dumps(d, sort_keys=True))
    _write(out / "trajectories.jsonl", "\n".join(lines) + "\n")
    _write(out / "curve.csv", curve_csv(header, curve))
    return [out / "trajectories.jsonl", out / "curve.csv"]


def cmd_shots(cfg: RunConfig) -> list[Path]:
    from .ensemble import EnsembleConfig, header_line, run_shot_ensemble
    from .statevector import NoiseParams

    L = _single(cfg, "--L", cfg.sizes)
    p = _single(cfg, "--p", cfg.ps)
    px = _single(cfg, "--px", cfg.pxs)
    ec = EnsembleConfig(L, p, px, cfg.circuits, cfg.seed)
    noise = NoiseParams(cfg.noise_epsilon, cfg.dephasing, cfg.shots)
    res = run_shot_ensemble(ec, noise, cfg.threshold, cfg.threads, cfg.mitigate)
    header = cfg.header("shots")
    buf = io.StringIO()
    buf.write(header_line(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = ["circuit", "measurements", "purifies", "sc", "sct"] + (["retained"] if cfg.mitigate else [])
    w.writerow(cols)
    for i in range(res.sc.size):
        row = [i, int(res.n_measurements[i]), int(res.purifies[i]), repr(float(res.sc[i])), int(res.sct[i])]
        if cfg.mitigate:
            row.append(repr(float(res.retained[i])))
        w.writerow(row)
    out = Path(cfg.out)
    _write(out / "shots.csv", buf.getvalue())
    summary = {"config": header, "n_circuits": int(res.sc.size), "sc_mean": _finite(res.sc_mean),
               "sct_mean": _finite(res.mean), "threshold": res.threshold}
    if cfg.mitigate and res.retained is not None and res.retained.size:
        summary["retained_mean"] = _finite(float(np.mean(res.retained)))
    _write(out / "summary.json", _json(summary))
    return [out / "shots.csv", out / "summary.json"]


def _need_input(cfg: RunConfig) -> Path:
    if not cfg.input:
        raise UsageError("--input is required")
    path = Path(cfg.input)
    if not path.is_file():
        raise RuntimeError(f"input file {path} does not exist")
    return path


def cmd_fit(cfg: RunConfig) -> list[Path]:
    from .ensemble import read_curve_csv
    from .scaling import FitError, fit_decay

    path = _need_input(cfg)
    try:
        src_header, t, mean, stderr = read_curve_csv(path.read_text())
    except (ValueError, json.JSONDecodeError) as exc:
        raise RuntimeError(f"{path}: {exc}") from None
    header = cfg.header("fit")
    result = {"config": header, "source": src_header}
    try:
        fit = fit_decay(t, mean, stderr, start_below=cfg.start_below, floor=cfg.floor)
        result.update(tau=fit.tau, t_start=fit.t_start, t_end=fit.t_end, amplitude=fit.amplitude,
                      r2=fit.r2, n_points=fit.n_points, summary=f"tau={fit.tau:.2f}")
    except FitError as exc:
        result.update(error=str(exc))
        _write(Path(cfg.out) / "fit.json", _json(result))
        raise RuntimeError(f"fit failed: {exc}") from None
    _write(Path(cfg.out) / "fit.json", _json(result))
    return [Path(cfg.out) / "fit.json"]


def _table(cfg: RunConfig):
    from .scaling import read_tau_table, tau_scan

    if cfg.input:
        path = _need_input(cfg)
        try:
            return read_tau_table(path.read_text()), False
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise RuntimeError(f"{path}: {exc}") from None
    p = _single(cfg, "--p", cfg.ps)
    table = tau_scan(p, cfg.pxs, cfg.sizes, cfg.circuits, cfg.seed, cfg.horizon_mult, cfg.unit, cfg.resamples,
                     cfg.threads, start_below=cfg.start_below, floor=cfg.floor)
    return table, True


def _check_cells(table) -> None:
    if table.cells and not any(c.ok for c in table.cells):
        raise RuntimeError("every tau fit failed")


def cmd_crossing(cfg: RunConfig) -> list[Path]:
    from .scaling import estimate_z, find_crossing, tau_table_csv

    table, scanned = _table(cfg)
    header = cfg.header("crossing")
    out = Path(cfg.out)
    paths = []
    if scanned:
        _write(out / "tau_table.csv", tau_table_csv(table, header))
        paths.append(out / "tau_table.csv")
    _check_cells(table)
    result = {"config": header, "failed_cells": [[c.L, c.px, c.error] for c in table.cells if not c.ok]}
    z = cfg.z
    if z is None:
        try:
            px_star, z = estimate_z(table)
            result.update(px_inflection=px_star, z_inflection=z)
        except ValueError as exc:
            result["z_error"] = str(exc)
            z = 0.0
    result["z"] = z
    try:
        cr = find_crossing(table, z)
    except ValueError as exc:
        result["error"] = str(exc)
        _write(out / "crossing.json", _json(result))
        raise RuntimeError(str(exc)) from None
    result.update(pxc=cr.pxc, spread=cr.spread, pairs=[list(p) for p in cr.pairs])
    _write(out / "crossing.json", _json(result))
    return paths + [out / "crossing.json"]


def cmd_collapse(cfg: RunConfig) -> list[Path]:
    from .scaling import collapse_csv, critical_point, crossing_or_none, optimize_collapse, tau_table_csv

    table, scanned = _table(cfg)
    header = cfg.header("collapse")
    out = Path(cfg.out)
    paths = []
    if scanned:
        _write(out / "tau_table.csv", tau_table_csv(table, header))
        paths.append(out / "tau_table.csv")
    _check_cells(table)
    if cfg.z is None:
        try:
            est = critical_point(table)
        except ValueError:
            est = optimize_collapse(table)
            est.crossing = crossing_or_none(table, est.z)
    else:
        est = optimize_collapse(table, bounds={"z": (cfg.z, cfg.z)})
        est.crossing = crossing_or_none(table, est.z)
    _write(out / "collapse.csv", collapse_csv(table, est))
    _write(out / "critical.json", _json({"config": header, **est.to_dict()}))
    return paths + [out / "collapse.csv", out / "critical.json"]


def cmd_phase_diagram(cfg: RunConfig) -> list[Path]:
    from .ensemble import header_line
    from .scaling import phase_diagram_sweep

    rows = phase_diagram_sweep(cfg.ps, cfg.pxs, cfg.sizes, cfg.circuits, cfg.seed, cfg.horizon_mult,
                               cfg.unit, cfg.resamples, cfg.threads, cfg.z)
    header = cfg.header("phase-diagram")
    buf = io.StringIO()
    buf.write(header_line(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "pxc", "spread", "z", "error"])
    for r in rows:
        w.writerow([repr(r.p), repr(r.pxc), repr(r.spread), repr(r.z), r.error or ""])
    path = Path(cfg.out) / "phase_diagram.csv"
    _write(path, buf.getvalue())
    if rows and all(r.error for r in rows):
        raise RuntimeError("every p value failed")
    return [path]


HANDLERS = {
    "generate": cmd_generate,
    "trajectories": cmd_trajectories,
    "shots": cmd_shots,
    "fit": cmd_fit,
    "crossing": cmd_crossing,
    "collapse": cmd_collapse,
    "phase-diagram": cmd_phase_diagram,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        paths = HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"purification: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"purification: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
