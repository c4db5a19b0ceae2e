"""Decay-time extraction and finite-size scaling.

Noiseless trajectories have entropy 1 until the purification step and 0
afterwards, so an ensemble curve is the survival function of purification
times.  The tau scan and its bootstrap work on those times directly.

The scaling ansatz is ``tau = L^z f((px - pxc) L^(z/nu))``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ensemble import EnsembleConfig, header_line, run_ensemble
from .seeds import circuit_seed, stream

TIME_UNITS = ("layers", "gates")
BOOTSTRAP_RESAMPLES = 200


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class DecayFit:
    tau: float
    t_start: int
    t_end: int
    amplitude: float
    r2: float
    n_points: int


def fit_window(mean: np.ndarray, stderr: np.ndarray | None, start_below: float = 0.5,
               floor: float = 1e-3, floor_sigmas: float = 3.0) -> tuple[int, int]:
    """``[start, end)``: from the first value below ``start_below`` to the first
    value below ``max(floor_sigmas * stderr, floor)``."""
    mean = np.asarray(mean, dtype=float)
    below = np.flatnonzero(mean < start_below)
    if below.size == 0:
        return 0, 0
    start = int(below[0])
    limit = np.full(mean.size, floor) if stderr is None else np.maximum(floor_sigmas * np.asarray(stderr), floor)
    gone = np.flatnonzero(mean[start:] < limit[start:])
    end = start + int(gone[0]) if gone.size else mean.size
    return start, end


def fit_decay(t, mean, stderr=None, start_below: float = 0.5, floor: float = 1e-3,
              floor_sigmas: float = 3.0, min_points: int = 8) -> DecayFit:
    """Least squares line through ``(t, ln mean)`` over the fit window; tau = -1/slope."""
    t = np.asarray(t, dtype=float)
    mean = np.asarray(mean, dtype=float)
    start, end = fit_window(mean, stderr, start_below, floor, floor_sigmas)
    sel = np.arange(start, end)
    sel = sel[mean[sel] > 0]
    if sel.size < min_points:
        raise FitError(f"only {sel.size} usable points in the fit window (need {min_points})")
    x, y = t[sel], np.log(mean[sel])
    slope, intercept = np.polyfit(x, y, 1)
    if slope >= 0:
        raise FitError("curve does not decay inside the fit window")
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(-1.0 / slope, int(t[sel[0]]), int(t[sel[-1]]), math.exp(intercept),
                    min(max(r2, 0.0), 1.0), int(sel.size))


def survival_curve(times: np.ndarray, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean entropy and its standard error from purification times (-1 = never)."""
    times = np.asarray(times, dtype=np.int64)
    n = times.size
    never = times < 0
    counts = np.bincount(times[~never], minlength=T + 1)[: T + 1]
    still = n - np.cumsum(counts)
    mean = still / n
    stderr = np.sqrt(mean * (1 - mean) / (n - 1)) if n > 1 else np.zeros(T + 1)
    return mean, stderr


def time_scale(L: int, unit: str) -> float:
    """Gates per time unit: a layer holds L/2 gates."""
    if unit == "layers":
        return L / 2
    if unit == "gates":
        return 1.0
    raise ValueError(f"unknown time unit {unit!r}; choose from {TIME_UNITS}")


@dataclass
class TauCell:
    L: int
    px: float
    tau: float = float("nan")
    tau_err: float = float("nan")
    r2: float = float("nan")
    n_circuits: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and math.isfinite(self.tau)


@dataclass
class TauTable:
    p: float
    cells: list[TauCell]
    unit: str = "layers"
    meta: dict = field(default_factory=dict)

    @property
    def sizes(self) -> list[int]:
        return sorted({c.L for c in self.cells})

    @property
    def pxs(self) -> list[float]:
        return sorted({c.px for c in self.cells})

    def series(self, L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(px, tau, tau_err) of the successful cells at size L."""
        rows = sorted((c.px, c.tau, c.tau_err) for c in self.cells if c.L == L and c.ok)
        arr = np.array(rows, dtype=float).reshape(-1, 3)
        return arr[:, 0], arr[:, 1], arr[:, 2]

    def get(self, L: int, px: float) -> TauCell | None:
        for c in self.cells:
            if c.L == L and math.isclose(c.px, px):
                return c
        return None


def bootstrap_tau(times: np.ndarray, T: int, scale: float, rng: np.random.Generator,
                  resamples: int = BOOTSTRAP_RESAMPLES, **window) -> float:
    """Standard deviation of tau over resampled circuit sets (failed fits skipped)."""
    n = times.size
    taus = []
    for _ in range(resamples):
        sample = times[rng.integers(0, n, n)]
        mean, se = survival_curve(sample, T)
        try:
            taus.append(fit_decay(np.arange(T + 1), mean, se, **window).tau / scale)
        except FitError:
            continue
    return float(np.std(taus, ddof=1)) if len(taus) > 1 else float("nan")


def tau_cell(L: int, p: float, px: float, n_circuits: int, seed: int, horizon_mult: float = 8.0,
             unit: str = "layers", resamples: int = BOOTSTRAP_RESAMPLES, threads: int = 1, **window) -> TauCell:
    cfg = EnsembleConfig(L, p, px, n_circuits, seed, horizon_mult)
    curve = run_ensemble(cfg, threads)
    scale = time_scale(L, unit)
    T = cfg.n_gates
    cell = TauCell(L, px, n_circuits=n_circuits)
    try:
        fit = fit_decay(curve.t, curve.mean, curve.stderr, **window)
    except FitError as exc:
        cell.error = str(exc)
        return cell
    cell.tau = fit.tau / scale
    cell.r2 = fit.r2
    rng = stream(circuit_seed(seed, L), int(round(px * 1e6)))
    cell.tau_err = bootstrap_tau(curve.purification_times, T, scale, rng, resamples, **window)
    return cell


def tau_scan(p: float, pxs, sizes, n_circuits: int, seed: int = 0, horizon_mult: float = 8.0,
             unit: str = "layers", resamples: int = BOOTSTRAP_RESAMPLES, threads: int = 1,
             progress=None, **window) -> TauTable:
    """tau for every (L, px) cell; failed fits are kept with their error message.

    All cells share the master seed, so circuit ``i`` draws the same
    uniforms in every cell.  Differences between neighbouring px values are
    correspondingly less noisy.
    """
    time_scale(2, unit)
    cells = []
    for L in sizes:
        for px in pxs:
            cell = tau_cell(int(L), p, float(px), n_circuits, seed, horizon_mult, unit, resamples, threads, **window)
            cells.append(cell)
            if progress:
                progress(cell)
    return TauTable(float(p), cells, unit, {"seed": seed, "n_circuits": n_circuits, "horizon_mult": horizon_mult})


# ---- critical point ----------------------------------------------------------


class NoCrossing(ValueError):
    pass


def _check_sizes(sizes: list[int]) -> None:
    if len(sizes) != len(set(sizes)):
        raise ValueError("duplicate system sizes")


def _roots(x: np.ndarray, d: np.ndarray) -> list[float]:
    out = []
    for i in range(x.size - 1):
        if d[i] == 0:
            out.append(float(x[i]))
        elif d[i] * d[i + 1] < 0:
            out.append(float(x[i] - d[i] * (x[i + 1] - x[i]) / (d[i + 1] - d[i])))
    if d.size and d[-1] == 0:
        out.append(float(x[-1]))
    return out


@dataclass
class Crossing:
    pxc: float
    spread: float
    pairs: list[tuple[int, int, float]]


def find_crossing(table: TauTable, z: float, sizes: list[int] | None = None) -> Crossing:
    """Crossings of tau/L^z between adjacent sizes, by piecewise-linear interpolation.

    For a pair with several sign changes the one closest to the middle of
    the common px range is used.
    """
    sizes = table.sizes if sizes is None else list(sizes)
    _check_sizes(sizes)
    sizes = sorted(sizes)
    if len(sizes) < 2:
        raise ValueError("need at least two sizes")
    pairs = []
    for a, b in zip(sizes, sizes[1:]):
        xa, ya, _ = table.series(a)
        xb, yb, _ = table.series(b)
        grid = np.intersect1d(np.round(xa, 12), np.round(xb, 12))
        if grid.size < 2:
            continue
        ia = np.searchsorted(np.round(xa, 12), grid)
        ib = np.searchsorted(np.round(xb, 12), grid)
        d = yb[ib] / b**z - ya[ia] / a**z
        roots = _roots(grid, d)
        if roots:
            mid = 0.5 * (grid[0] + grid[-1])
            pairs.append((a, b, min(roots, key=lambda r: abs(r - mid))))
    if not pairs:
        raise NoCrossing("tau/L^z curves do not cross for any size pair")
    vals = np.array([r for _, _, r in pairs])
    spread = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return Crossing(float(vals.mean()), spread, pairs)


def crossing_or_none(table: TauTable, z: float) -> Crossing | None:
    try:
        return find_crossing(table, z)
    except NoCrossing:
        return None


def estimate_z(table: TauTable) -> tuple[float, float]:
    """(px at the log-log inflection, slope there).

    For each px a quadratic in ln L is fitted to ln tau; its curvature is
    positive where tau grows faster than a power law and negative where it
    saturates.  The inflection is the zero of the curvature (interpolated
    in px) and z is the local slope at the mean ln L.
    """
    sizes = table.sizes
    if len(sizes) < 3:
        raise ValueError("need at least three sizes")
    xs = np.log(np.array(sizes, dtype=float))
    xbar = xs.mean()
    pxs, curv, slope = [], [], []
    for px in table.pxs:
        cells = [table.get(L, px) for L in sizes]
        if not all(c is not None and c.ok for c in cells):
            continue
        y = np.log([c.tau for c in cells])
        c2, c1, _ = np.polyfit(xs - xbar, y, 2)
        pxs.append(px)
        curv.append(c2)
        slope.append(c1)
    pxs, curv, slope = map(np.array, (pxs, curv, slope))
    roots = _roots(pxs, curv)
    if not roots:
        raise NoCrossing("log-log curvature never changes sign")
    mid = 0.5 * (pxs[0] + pxs[-1])
    px_star = min(roots, key=lambda r: abs(r - mid))
    return float(px_star), float(np.interp(px_star, pxs, slope))


def scaled_points(table: TauTable, pxc: float, z: float, nu: float) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per size: (x = (px - pxc) L^(z/nu), y = tau / L^z)."""
    out = {}
    for L in table.sizes:
        px, tau, _ = table.series(L)
        out[L] = ((px - pxc) * L ** (z / nu), tau / L**z)
    return out


def collapse(table: TauTable, pxc: float, z: float, nu: float, min_overlap: float = 0.5) -> float:
    """Mean squared deviation of ln y from the other sizes' interpolated curves.

    Points outside every other size's x range do not contribute; if fewer
    than ``min_overlap`` of the points can be compared the cost is inf.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    pts = scaled_points(table, pxc, z, nu)
    if len(pts) < 2:
        raise ValueError("collapse needs at least two sizes")
    total = 0.0
    used = 0
    n_points = 0
    for L, (x, y) in pts.items():
        n_points += x.size
        ly = np.log(y)
        for M, (xo, yo) in pts.items():
            if M == L or xo.size < 2:
                continue
            inside = (x >= xo[0]) & (x <= xo[-1])
            if not inside.any():
                continue
            pred = np.interp(x[inside], xo, np.log(yo))
            total += float(np.sum((ly[inside] - pred) ** 2))
            used += int(inside.sum())
    if n_points == 0 or used < min_overlap * n_points:
        return math.inf
    return total / used


@dataclass
class CriticalEstimate:
    pxc: float
    z: float
    nu: float
    cost: float
    crossing: Crossing | None = None
    z_inflection: float | None = None
    px_inflection: float | None = None

    def to_dict(self) -> dict:
        d = {"pxc": self.pxc, "z": self.z, "nu": self.nu, "cost": self.cost,
             "z_inflection": self.z_inflection, "px_inflection": self.px_inflection}
        if self.crossing is not None:
            d["pxc_crossing"] = self.crossing.pxc
            d["pxc_spread"] = self.crossing.spread
        return d


DEFAULT_BOUNDS = {"pxc": None, "z": (0.0, 1.0), "nu": (0.1, 2.0)}


def optimize_collapse(table: TauTable, initial: tuple[float, float, float] | None = None,
                      bounds: dict | None = None, points: int = 11, rounds: int = 8) -> CriticalEstimate:
    """Grid refinement over (pxc, z, nu) minimising :func:`collapse`.

    Each round evaluates a ``points^3`` grid around the current best and
    halves the box.  ``initial`` only centres the first grid.
    """
    if len(table.sizes) < 2:
        raise ValueError("collapse needs at least two sizes")
    b = dict(DEFAULT_BOUNDS)
    b.update(bounds or {})
    pxs = table.pxs
    lo = np.array([b["pxc"][0] if b["pxc"] else pxs[0], b["z"][0], b["nu"][0]], dtype=float)
    hi = np.array([b["pxc"][1] if b["pxc"] else pxs[-1], b["z"][1], b["nu"][1]], dtype=float)
    centre = (lo + hi) / 2 if initial is None else np.clip(np.array(initial, dtype=float), lo, hi)
    half = (hi - lo) / 2
    best, best_cost = centre, math.inf
    for _ in range(rounds):
        axes = [np.clip(np.linspace(centre[i] - half[i], centre[i] + half[i], points), lo[i], hi[i]) for i in range(3)]
        for pc in axes[0]:
            for z in axes[1]:
                for nu in axes[2]:
                    cost = collapse(table, pc, z, nu)
                    if cost < best_cost:
                        best_cost, best = cost, np.array([pc, z, nu])
        centre = best
        half = half / 2
    return CriticalEstimate(float(best[0]), float(best[1]), float(best[2]), float(best_cost))


def critical_point(table: TauTable) -> CriticalEstimate:
    """Inflection estimate of z, collapse refinement, then the crossing at the refined z.

    Without an inflection the collapse grid starts from the centre of its box.
    """
    try:
        px0, z0 = estimate_z(table)
    except NoCrossing:
        est = optimize_collapse(table)
    else:
        est = optimize_collapse(table, initial=(px0, z0, 0.5))
        est.z_inflection, est.px_inflection = z0, px0
    est.crossing = crossing_or_none(table, est.z)
    return est


@dataclass
class PhaseBoundaryRow:
    p: float
    pxc: float = float("nan")
    spread: float = float("nan")
    z: float = float("nan")
    error: str | None = None


def phase_diagram_sweep(ps, pxs, sizes, n_circuits: int, seed: int = 0, horizon_mult: float = 8.0,
                        unit: str = "layers", resamples: int = BOOTSTRAP_RESAMPLES, threads: int = 1,
                        z: float | None = None) -> list[PhaseBoundaryRow]:
    """Critical px for each p.  Failures are recorded per row and the sweep goes on."""
    rows = []
    for p in ps:
        row = PhaseBoundaryRow(float(p))
        try:
            table = tau_scan(p, pxs, sizes, n_circuits, seed, horizon_mult, unit, resamples, threads)
            if z is None:
                _, z_used = estimate_z(table)
            else:
                z_used = z
            cr = find_crossing(table, z_used)
            row.pxc, row.spread, row.z = cr.pxc, cr.spread, z_used
        except (ValueError, FitError) as exc:
            row.error = str(exc)
        rows.append(row)
    return rows


# ---- tables as text ------------------------------------------------------------


def tau_table_csv(table: TauTable, header: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(header_line({"p": table.p, "unit": table.unit, **table.meta, **(header or {})}) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "px", "tau", "tau_err", "r2", "n_circuits", "error"])
    for c in table.cells:
        w.writerow([c.L, repr(float(c.px)), repr(float(c.tau)), repr(float(c.tau_err)), repr(float(c.r2)), c.n_circuits, c.error or ""])
    return buf.getvalue()


def read_tau_table(text: str) -> TauTable:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing config header line")
    header = json.loads(lines[0][2:])
    rows = list(csv.reader(lines[1:]))
    if not rows or rows[0][:5] != ["L", "px", "tau", "tau_err", "r2"]:
        raise ValueError("expected columns L,px,tau,tau_err,r2")
    cols = rows[0]
    cells = []
    for r in rows[1:]:
        if not r:
            continue
        rec = dict(zip(cols, r))
        cells.append(TauCell(int(rec["L"]), float(rec["px"]), float(rec["tau"]),
                             float(rec.get("tau_err") or "nan"), float(rec.get("r2") or "nan"),
                             int(rec.get("n_circuits") or 0), rec.get("error") or None))
    meta = {k: v for k, v in header.items() if k not in ("p", "unit")}
    return TauTable(float(header.get("p", float("nan"))), cells, header.get("unit", "layers"), meta)


def collapse_csv(table: TauTable, est: CriticalEstimate) -> str:
    buf = io.StringIO()
    buf.write(header_line({"p": table.p, **est.to_dict()}) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "L"])
    for L, (x, y) in scaled_points(table, est.pxc, est.z, est.nu).items():
        for xi, yi in zip(x, y):
            w.writerow([repr(float(xi)), repr(float(yi)), L])
    return buf.getvalue()
