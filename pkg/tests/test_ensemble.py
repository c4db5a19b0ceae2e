import numpy as np
import pytest

from purification.circuit import CNOT, XX, Circuit, Clifford1q, generate_circuit, purification_profile
from purification.ensemble import (
    EnsembleConfig,
    bloch_entropy,
    calibrate_threshold,
    curve_csv,
    mitigate_shots,
    mitigation_plan,
    read_curve_csv,
    run_ensemble,
    run_shot_ensemble,
    run_trajectory,
    simulate_trajectory,
    tomography_entropy,
    trajectories_jsonl,
)
from purification.seeds import circuit_seed, circuit_streams
from purification.stabilizer.cliffords import HADAMARD
from purification.statevector import NoiseParams, run_noisy_circuit


def test_seed_derivation_is_stable():
    assert circuit_seed(0, 0) == circuit_seed(0, 0)
    assert circuit_seed(0, 0) != circuit_seed(0, 1)
    assert circuit_seed(1, 0) != circuit_seed(0, 1)
    assert 0 <= circuit_seed(123, 456) < 2**63


@pytest.mark.parametrize("L,px", [(4, 0.0), (6, 0.5), (8, 1.0)])
def test_fused_path_matches_generated_circuit(L, px):
    for seed in range(40):
        fused = simulate_trajectory(L, 0.15, px, seed, stop_when_pure=False)
        c = generate_circuit(L, 0.15, px, seed, feedback=False)
        generic = run_trajectory(c, circuit_streams(seed).outcomes, by_rank=True)
        assert np.array_equal(fused.entropy, generic.entropy)
        assert fused.n_measurements == generic.n_measurements == c.n_ancillae


def test_stop_when_pure_only_fills_zeros():
    for seed in range(40):
        a = simulate_trajectory(6, 0.3, 1.0, seed, stop_when_pure=True)
        b = simulate_trajectory(6, 0.3, 1.0, seed, stop_when_pure=False)
        assert np.array_equal(a.entropy, b.entropy)


def test_measurement_free_circuit_stays_mixed():
    rec = simulate_trajectory(6, 0.0, 0.5, 1)
    assert np.all(rec.entropy == 1) and rec.purification_time is None


def test_entropy_series_zero_one_and_monotone():
    for seed in range(100):
        rec = simulate_trajectory(6, 0.4, 0.6, seed, n_gates=60)
        assert set(np.unique(rec.entropy).tolist()) <= {0, 1}
        assert np.all(np.diff(rec.entropy.astype(int)) <= 0)


def test_single_and_empty_ensembles():
    one = run_ensemble(EnsembleConfig(4, 0.15, 0.5, 1))
    assert np.all(one.stderr == 0)
    empty = run_ensemble(EnsembleConfig(4, 0.15, 0.5, 0))
    assert empty.n_circuits == 0 and np.all(np.isnan(empty.mean))


def test_config_validation():
    for bad in (dict(L=1), dict(p=1.5), dict(px=-0.1), dict(n_circuits=-1), dict(horizon_mult=0)):
        kw = dict(L=4, p=0.1, px=0.1, n_circuits=1) | bad
        with pytest.raises(ValueError):
            EnsembleConfig(**kw)


def test_parallel_equals_serial():
    cfg = EnsembleConfig(6, 0.15, 0.5, 60, seed=9, horizon_mult=2)
    a = run_ensemble(cfg, threads=1)
    b = run_ensemble(cfg, threads=3)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.stderr, b.stderr)
    assert np.array_equal(a.purification_times, b.purification_times)


def test_extra_branches_do_not_change_noiseless_curve():
    one = run_ensemble(EnsembleConfig(6, 0.2, 0.7, 40, seed=2))
    three = run_ensemble(EnsembleConfig(6, 0.2, 0.7, 40, seed=2, branches=3))
    assert np.array_equal(one.mean, three.mean)


def test_mean_curve_non_increasing():
    curve = run_ensemble(EnsembleConfig(6, 0.15, 0.5, 200, seed=4, horizon_mult=3))
    assert np.all(np.diff(curve.mean) <= 1e-12)


def test_noiseless_shots_threshold_matches_purification():
    cfg = EnsembleConfig(6, 0.15, 1.0, 40, seed=5)
    res = run_shot_ensemble(cfg, NoiseParams(shots=1000))
    assert np.all(res.sc[res.purifies] == 0)
    mixed = res.sc[~res.purifies]
    assert mixed.size and mixed.min() > 0.99
    assert np.array_equal(res.sct == 0, res.purifies)


def test_mitigation_is_identity_without_noise():
    for seed in range(20):
        c = generate_circuit(6, 0.3, 0.5, seed)
        plan = mitigation_plan(c)
        aligned = plan.apply(c)
        bits = np.array([s.bits for s in run_noisy_circuit(aligned, NoiseParams(shots=300), np.random.default_rng(seed))])
        kept, stats = mitigate_shots(aligned, bits, plan)
        assert stats.n == 1.0 and kept.shape == bits.shape
        assert c.reference not in plan.checked


def test_flipped_idle_qubit_is_discarded():
    seed = 0
    while True:
        c = generate_circuit(6, 0.3, 0.5, seed)
        plan = mitigation_plan(c)
        if plan.checked:
            break
        seed += 1
    aligned = plan.apply(c)
    bits = np.array([s.bits for s in run_noisy_circuit(aligned, NoiseParams(shots=10), np.random.default_rng(0))])
    bits[0, plan.checked[0]] ^= 1
    kept, stats = mitigate_shots(aligned, bits, plan)
    assert kept.shape[0] == 9 and stats.n == 0.9


def test_bloch_entropy_values():
    assert bloch_entropy(np.zeros(3)) == 1.0
    assert bloch_entropy(np.array([0, 0, 1.0])) == 0.0
    assert abs(bloch_entropy(np.array([0.8, 0, 0])) - 0.46899559358928117) < 1e-12
    assert bloch_entropy(np.array([1.0, 1.0, 0])) == 0.0


def test_tomography_recovers_reference_entropy():
    seen = set()
    for seed in range(40):
        c = generate_circuit(4, 0.3, 0.5, seed, feedback=False)
        target = 0 if purification_profile(c).purifies else 1
        if target in seen:
            continue
        seen.add(target)
        res = tomography_entropy(c, shots=4000, rng=np.random.default_rng(seed))
        assert res.entropy
        for s in res.entropy.values():
            assert abs(s - target) < 0.1
        if seen == {0, 1}:
            break
    assert seen == {0, 1}


def test_tomography_rejects_feedback_circuits():
    c = Circuit(2, [], segments={"feedback": (0, 0)})
    with pytest.raises(ValueError):
        tomography_entropy(c)


def test_threshold_calibration_separates_modes():
    rng = np.random.default_rng(0)
    sc = np.concatenate([rng.normal(0.7, 0.05, 400), rng.normal(1.0, 0.01, 400)])
    thr = calibrate_threshold(sc)
    assert 0.8 < thr < 0.99


def test_curve_csv_round_trip():
    cfg = EnsembleConfig(4, 0.15, 0.5, 20)
    curve = run_ensemble(cfg, keep_records=True)
    header, t, mean, err = read_curve_csv(curve_csv(cfg.header(), curve))
    assert header == cfg.header()
    assert np.array_equal(mean, curve.mean) and np.array_equal(err, curve.stderr)
    lines = trajectories_jsonl(cfg.header(), curve.records).splitlines()
    assert len(lines) == 21
    with pytest.raises(ValueError):
        read_curve_csv("t,mean,stderr\n")


def test_noise_gates_are_xx_only():
    # CNOT-only circuit is untouched by crosstalk
    c = Circuit(2, [Clifford1q(2, HADAMARD), CNOT(2, 0)])
    assert c.count(XX) == 0
    bits = np.array([s.bits for s in run_noisy_circuit(c, NoiseParams(epsilon=0.5, dephasing=0.5, shots=500),
                                                        np.random.default_rng(1))])
    assert np.all(bits[:, 0] == bits[:, 2]) and np.all(bits[:, 1] == 0)
