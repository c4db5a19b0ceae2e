import numpy as np
import pytest

from purification.circuit import XX, Circuit, MeasureDirect, apply_op, enumerate_deferred, generate_circuit
from purification.stabilizer import Basis, Tableau
from purification.statevector import (
    MAX_QUBITS,
    NoiseParams,
    QubitBudgetError,
    StateVector,
    binary_entropy,
    classical_entropy,
    final_state,
    record_distribution,
    run_noisy_circuit,
    tableau_to_statevector,
)


def test_gate_examples():
    s = StateVector(1).h(0)
    assert np.allclose(s.psi, np.array([1, 1]) / np.sqrt(2))
    s = StateVector(2).xx(0, 1, np.pi / 4)
    assert np.allclose(s.psi, np.array([1, 0, 0, -1j]) / np.sqrt(2))


def test_measure_examples():
    rng = np.random.default_rng(0)
    for _ in range(20):
        plus = StateVector(1).h(0)
        assert plus.measure(0, Basis.X, rng=rng) == (0, True)
        assert np.allclose(plus.psi, np.array([1, 1]) / np.sqrt(2))
        zero = StateVector(1)
        assert zero.measure(0, Basis.Z, rng=rng) == (0, True)


def test_bloch_axes():
    assert np.allclose(StateVector(1).bloch(0), [0, 0, 1])
    assert np.allclose(StateVector(1).h(0).bloch(0), [1, 0, 0])
    assert np.allclose(StateVector(1).h(0).s(0).bloch(0), [0, 1, 0])


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(1.0) == 0.0
    assert abs(binary_entropy(0.9) - 0.46899559358928117) < 1e-12


def test_tableau_conversion():
    assert np.allclose(tableau_to_statevector(Tableau(1)).psi, [1, 0])
    bell = tableau_to_statevector(Tableau(2).h(0).cnot(0, 1)).psi
    assert np.allclose(bell, np.array([1, 0, 0, 1]) / np.sqrt(2))


def test_qubit_budget():
    with pytest.raises(QubitBudgetError):
        StateVector(MAX_QUBITS + 1)


def _small_circuit(i, L=4):
    return generate_circuit(L, 0.3, 0.5, seed=1000 + i, n_gates=10)


def test_noiseless_shots_match_branch_probabilities():
    # pooled chi-square over record x reference bit on a few circuits
    rng = np.random.default_rng(42)
    shots = 10_000
    for i in range(6):
        c = _small_circuit(i)
        readout = c.ancillae + [c.reference]
        expected = {}
        for br in enumerate_deferred(c, qubits=readout):
            expected[br.record] = br.probability
        recs = run_noisy_circuit(c, NoiseParams(shots=shots), rng)
        keys = [tuple(int(r.bits[q]) for q in readout) for r in recs]
        observed = {}
        for k in keys:
            observed[k] = observed.get(k, 0) + 1
        assert set(observed) <= set(expected)
        chi2 = sum((observed.get(k, 0) - shots * p) ** 2 / (shots * p) for k, p in expected.items())
        dof = max(len(expected) - 1, 1)
        # 5 sigma above the chi-square mean
        assert chi2 < dof + 5 * np.sqrt(2 * dof)


def test_full_dephasing_is_deterministic_z():
    c = _small_circuit(3)
    s = StateVector(c.n_qubits)
    for op in c.ops:
        apply_op(s, op)
        if isinstance(op, XX):
            s.z(op.a).z(op.b)
    probs = np.abs(s.psi) ** 2
    rng = np.random.default_rng(1)
    recs = run_noisy_circuit(c, NoiseParams(dephasing=1.0, shots=4000), rng)
    idx = np.array([int(sum(int(b) << q for q, b in enumerate(r.bits))) for r in recs])
    assert np.all(probs[idx] > 1e-12)
    emp = np.bincount(idx, minlength=probs.size) / len(idx)
    assert np.abs(emp - probs).max() < 0.05


def test_crosstalk_changes_state_only_when_enabled():
    c = _small_circuit(1)
    a = final_state(c).psi
    b = final_state(c, NoiseParams(epsilon=0.0)).psi
    assert np.allclose(a, b)
    d = final_state(c, NoiseParams(epsilon=0.03)).psi
    assert abs(abs(np.vdot(a, d)) - 1) > 1e-8


def test_spectators_exclude_partner_and_respect_bounds():
    noise = NoiseParams(epsilon=0.1)
    assert noise.spectators(0, 5) == (1,)
    assert noise.spectators(2, 5) == (1, 3)
    assert noise.spectators(4, 5) == (3,)


def test_classical_entropy():
    assert classical_entropy(np.array([0, 1, 0, 1])) == 1.0
    assert classical_entropy(np.zeros(10, dtype=int)) == 0.0
    with pytest.raises(ValueError):
        classical_entropy(np.array([]))


def test_record_distribution_sums_to_one():
    c = _small_circuit(2)
    dist = record_distribution(c)
    assert abs(sum(p for p, _ in dist.values()) - 1) < 1e-12
    for _, bloch in dist.values():
        assert np.linalg.norm(bloch) <= 1 + 1e-10


def test_noisy_runs_need_deferred_form():
    c = Circuit(2, [MeasureDirect(0, Basis.Z)])
    with pytest.raises(ValueError):
        run_noisy_circuit(c, NoiseParams(), np.random.default_rng(0))
