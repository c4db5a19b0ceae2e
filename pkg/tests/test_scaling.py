import math

import numpy as np
import pytest
from _builders import planted_table

from purification.scaling import (
    FitError,
    NoCrossing,
    TauCell,
    TauTable,
    collapse,
    collapse_csv,
    critical_point,
    estimate_z,
    find_crossing,
    fit_decay,
    fit_window,
    optimize_collapse,
    phase_diagram_sweep,
    read_tau_table,
    survival_curve,
    tau_cell,
    tau_table_csv,
    time_scale,
)

T = np.arange(101)


def test_pure_exponential():
    fit = fit_decay(T, np.exp(-T / 10))
    assert abs(fit.tau - 10) < 0.01
    assert fit.r2 > 0.999


@pytest.mark.parametrize("tau,amp", [(25, 0.5), (7.5, 0.3), (40, 0.45)])
def test_amplitude_does_not_matter(tau, amp):
    t = np.arange(400)
    assert abs(fit_decay(t, amp * np.exp(-t / tau)).tau - tau) < 0.01 * tau


def test_amplitude_rescaling_invariance():
    t = np.arange(300)
    y = 0.4 * np.exp(-t / 30) * (1 + 0.01 * np.sin(t))
    assert math.isclose(fit_decay(t, y, start_below=1, floor=0).tau, fit_decay(t, 0.5 * y, start_below=1, floor=0).tau)


def test_fit_failures():
    with pytest.raises(FitError):
        fit_decay(np.arange(5), np.exp(-np.arange(5) / 3))
    with pytest.raises(FitError):
        fit_decay(T, np.linspace(0.1, 0.4, T.size))
    with pytest.raises(FitError):
        fit_decay(T, np.ones(T.size))


def test_window_policy():
    mean = np.exp(-T / 10)
    start, end = fit_window(mean, None)
    assert mean[start] < 0.5 <= mean[start - 1]
    assert mean[end] < 1e-3 <= mean[end - 1]
    se = np.full(T.size, 0.01)
    _, end2 = fit_window(mean, se)
    assert mean[end2] < 0.03 <= mean[end2 - 1]


def test_survival_curve():
    times = np.array([0, 2, 2, -1])
    mean, se = survival_curve(times, 3)
    assert np.allclose(mean, [0.75, 0.75, 0.25, 0.25])
    assert np.all(se >= 0)


def test_time_units():
    assert time_scale(16, "layers") == 8 and time_scale(16, "gates") == 1
    with pytest.raises(ValueError):
        time_scale(16, "hours")


def test_planted_crossing():
    table = planted_table()
    cr = find_crossing(table, 0.2)
    assert abs(cr.pxc - 0.7) < 1e-9
    assert len(cr.pairs) == 2


def test_zero_exponent_uses_raw_tau():
    table = planted_table()
    reduced = TauTable(table.p, [TauCell(c.L, c.px, c.tau / c.L**0.2, c.tau_err, c.r2) for c in table.cells])
    assert math.isclose(find_crossing(reduced, 0.0).pxc, find_crossing(table, 0.2).pxc)


def test_crossing_guards():
    table = planted_table()
    with pytest.raises(ValueError):
        find_crossing(table, 0.2, sizes=[16, 16])
    with pytest.raises(ValueError):
        find_crossing(table, 0.2, sizes=[16])
    flat = TauTable(0.1, [TauCell(L, px, float(L), 0, 1) for L in (8, 16) for px in (0.1, 0.2, 0.3)])
    with pytest.raises(NoCrossing):
        find_crossing(flat, 0.0)


def test_collapse_cost_minimal_at_truth():
    table = planted_table()
    best = collapse(table, 0.7, 0.2, 0.5)
    assert best < 1e-5
    for i in range(3):
        for factor in (0.8, 1.2):
            params = [0.7, 0.2, 0.5]
            params[i] *= factor
            assert collapse(table, *params) > best


def test_collapse_needs_two_sizes():
    single = planted_table(sizes=(16,))
    with pytest.raises(ValueError):
        collapse(single, 0.7, 0.2, 0.5)
    with pytest.raises(ValueError):
        optimize_collapse(single)


def test_optimizer_recovers_planted_parameters():
    est = critical_point(planted_table())
    assert abs(est.pxc - 0.7) < 0.005
    assert abs(est.z - 0.2) < 0.01
    assert abs(est.nu - 0.5) < 0.02
    assert est.crossing is not None and abs(est.crossing.pxc - 0.7) < 0.005


def test_inflection_estimate():
    px, z = estimate_z(planted_table(pxc=0.72, z=0.25, sizes=(16, 32, 64, 128)))
    assert abs(px - 0.72) < 0.01 and abs(z - 0.25) < 0.02


def test_critical_point_without_inflection():
    # ln tau convex in ln L at every px: no curvature zero
    cells = [TauCell(L, px, float(np.exp(0.05 * L) * (2 - px)), 0.01, 1.0, 100)
             for L in (16, 32, 64) for px in (0.6, 0.7, 0.8)]
    est = critical_point(TauTable(0.15, cells))
    assert est.z_inflection is None and math.isfinite(est.z)


def test_tau_table_text_round_trip():
    table = planted_table()
    table.cells.append(TauCell(16, 0.9, error="only 2 usable points"))
    back = read_tau_table(tau_table_csv(table))
    assert back.p == table.p and back.sizes == table.sizes
    for a, b in zip(table.cells, back.cells):
        assert a.L == b.L and a.px == b.px and a.error == b.error
        assert a.tau == b.tau or (math.isnan(a.tau) and math.isnan(b.tau))
    text = collapse_csv(table, critical_point(planted_table()))
    assert text.splitlines()[1] == "x,y,L"


def test_simulated_cell_is_deterministic_and_positive():
    a = tau_cell(8, 0.15, 1.0, 200, seed=1, horizon_mult=4, resamples=20)
    b = tau_cell(8, 0.15, 1.0, 200, seed=1, horizon_mult=4, resamples=20)
    assert a.ok and a.tau > 0 and a.tau_err > 0
    assert (a.tau, a.tau_err, a.r2) == (b.tau, b.tau_err, b.r2)


def test_near_critical_fit_quality():
    cell = tau_cell(32, 0.15, 0.7, 1000, seed=0, resamples=10)
    assert cell.ok and cell.r2 > 0.95


def test_mixed_phase_tau_grows():
    # the plateau never drops below 0.5 here, so start the window earlier
    small = tau_cell(8, 0.15, 0.0, 300, seed=0, resamples=5, start_below=0.95)
    large = tau_cell(16, 0.15, 0.0, 300, seed=0, resamples=5, start_below=0.95)
    assert large.tau > 1.5 * small.tau


def test_pure_phase_tau_saturates():
    taus = [tau_cell(L, 0.15, 1.0, 2000, seed=0, resamples=5).tau for L in (16, 32)]
    assert abs(taus[1] / taus[0] - 1) < 0.3


def test_empty_sweep():
    assert phase_diagram_sweep([], [0.5], [8, 16], 10) == []


def test_sweep_records_failures():
    rows = phase_diagram_sweep([0.15], [0.0, 1.0], [4, 6], 20, horizon_mult=1, resamples=2, z=0.0)
    assert len(rows) == 1
    row = rows[0]
    assert row.error is not None or math.isfinite(row.pxc)
