import numpy as np
import pytest
from _builders import S1_TABLE, feedback_failures, s1_circuit, same_up_to_phase

from purification.circuit import (
    CNOT,
    XX,
    Align,
    Circuit,
    CircuitFormatError,
    Clifford1q,
    DeferredMeasure,
    MeasureDirect,
    XGate,
    append_feedback,
    build_bell_prep,
    build_direct_circuit,
    build_scrambler,
    defer_measurements,
    direct_form,
    dumps,
    enumerate_deferred,
    enumerate_direct,
    fit_affine,
    generate_circuit,
    loads,
    merge_single_qubit,
    ng_for,
    optimize_circuit,
    plan_from_truth_table,
    purification_profile,
    run,
    synthesize_feedback,
    truncate_evolution,
)
from purification.seeds import circuit_streams
from purification.stabilizer import Basis, Tableau
from purification.stabilizer.cliffords import HADAMARD, PAULI_Z, PHASE
from purification.statevector import tableau_to_statevector


def test_gate_budget():
    assert [ng_for(L) for L in (4, 6, 8)] == [8, 14, 22]
    with pytest.raises(ValueError):
        ng_for(1)


def test_bell_partner_uniform():
    L, n = 6, 12_000
    counts = np.zeros(L)
    rng = np.random.default_rng(0)
    for _ in range(n):
        h, cx = build_bell_prep(L, rng)
        assert h == Clifford1q(L, HADAMARD) and cx.control == L
        counts[cx.target] += 1
    sigma = np.sqrt(n * (1 / L) * (1 - 1 / L))
    assert np.all(np.abs(counts - n / L) < 5 * sigma)


def test_scrambler_structure():
    ops = build_scrambler(6, np.random.default_rng(1))
    assert sum(isinstance(o, Clifford1q) for o in ops) == 12
    assert sum(isinstance(o, XX) for o in ops) == 6
    ops = build_scrambler(5, np.random.default_rng(2))
    layers = [ops[5:7], ops[12:14]]
    for layer in layers:
        assert all(isinstance(o, XX) for o in layer)
        touched = [q for o in layer for q in (o.a, o.b)]
        assert len(set(touched)) == 4


def test_no_measurements_at_zero_rate():
    c = build_direct_circuit(6, 0.0, 0.5, seed=3)
    assert c.n_measurements == 0
    assert defer_measurements(c) is c
    assert not purification_profile(c).purifies
    assert "feedback" not in generate_circuit(6, 0.0, 0.5, seed=3).segments


def _oracle_direct(L, p, px, seed, T):
    """Plain-Python replay of the measurement protocol on the Tableau API."""
    s = circuit_streams(seed)
    pre = build_bell_prep(L, s.prep) + build_scrambler(L, s.prep)
    t = Tableau(L + 1)
    run(pre, t)
    draws = s.gates.random((T, 5))
    outs = s.outcomes.random(T)
    eligible = set(range(L))
    k = 0
    ops = list(pre)
    for step in range(T):
        a = int(draws[step, 0] * L)
        b = int(draws[step, 1] * (L - 1))
        b += b >= a
        t.xx_pi4(a, b)
        ops.append(XX(a, b))
        if draws[step, 2] >= p:
            continue
        cands = [q for q in (a, b) if q in eligible]
        if not cands:
            continue
        q = cands[0] if len(cands) == 1 else (a if draws[step, 3] < 0.5 else b)
        basis = Basis.X if draws[step, 4] < px else Basis.Z
        if t.is_deterministic(q, basis):
            continue
        t.measure(q, basis, force=int(outs[k] >= 0.5))
        k += 1
        ops.append(MeasureDirect(q, basis))
        eligible.discard(q)
        if len(eligible) <= max(L - 4, 0):
            eligible = set(range(L))
    return ops


@pytest.mark.parametrize("L,p,px", [(4, 0.5, 0.5), (6, 0.15, 0.0), (8, 0.3, 1.0), (5, 0.9, 0.3), (3, 1.0, 0.5)])
def test_generator_matches_protocol_oracle(L, p, px):
    for seed in range(15):
        T = 3 * ng_for(L)
        c = build_direct_circuit(L, p, px, seed, n_gates=T)
        assert c.ops == _oracle_direct(L, p, px, seed, T)


def test_measured_qubits_leave_the_list():
    for seed in range(40):
        L = 8
        c = build_direct_circuit(L, 0.6, 0.5, seed, n_gates=5 * ng_for(L))
        since_refill = set()
        for op in c.segment("evolution"):
            if isinstance(op, MeasureDirect):
                assert 0 <= op.q < L
                assert op.q not in since_refill
                since_refill.add(op.q)
                if L - len(since_refill) <= L - 4:
                    since_refill = set()


def _reference_stats(branches, ref):
    out = {}
    for br in branches:
        out[br.record] = (br.probability, br.state.bloch(ref))
    return out


def test_deferral_preserves_branch_statistics():
    for seed in range(30):
        c = build_direct_circuit(4, 0.4, 0.5, seed, n_gates=12)
        d = defer_measurements(c)
        assert d.n_ancillae == c.n_measurements
        assert all(isinstance(o, DeferredMeasure) for o in d.measurements)
        assert _reference_stats(enumerate_direct(c), 4) == _reference_stats(enumerate_deferred(d), 4)
        assert direct_form(d).ops == c.ops


def test_table_fit_is_not_of_parity():
    records = np.array(sorted(S1_TABLE))
    values = np.array([S1_TABLE[tuple(r)] for r in records])
    assert fit_affine(records, values) == ((1, 2), 1)
    plan = plan_from_truth_table(S1_TABLE, Basis.X)
    assert all(plan.predict(r) == v for r, v in S1_TABLE.items())


def test_non_affine_table_rejected():
    table = {(0, 0): 0, (0, 1): 0, (1, 0): 0, (1, 1): 1}
    with pytest.raises(ValueError):
        plan_from_truth_table(table, Basis.Z)


def test_constructed_table_circuit():
    c = s1_circuit()
    plan, ops = synthesize_feedback(c)
    assert plan.basis == Basis.X and plan.mask == (1, 2) and plan.offset == 1
    assert ops == [Align(4, Basis.X), CNOT(6, 4), CNOT(7, 4), XGate(4)]
    assert feedback_failures(append_feedback(c)) == []


@pytest.mark.parametrize("flip,expected", [(False, 0), (True, 1)])
def test_record_free_feedback(flip, expected):
    ops = [Clifford1q(2, HADAMARD)] + ([Clifford1q(2, PAULI_Z)] if flip else [])
    c = Circuit(2, ops, segments={"evolution": (0, len(ops))}, n_steps=0)
    plan, fb = synthesize_feedback(c)
    assert plan.mask == () and plan.offset == expected
    assert fb[0] == Align(2, Basis.X) and len(fb) == 1 + expected


def test_generated_feedback_on_purifying_circuits():
    done = 0
    seed = 0
    while done < 50:
        c = generate_circuit(6, 0.3, 0.7, seed)
        seed += 1
        if "feedback" not in c.segments:
            continue
        assert feedback_failures(c) == []
        done += 1


def test_purification_profile_single_drop():
    for seed in range(60):
        c = generate_circuit(6, 0.15, 1.0, seed, feedback=False)
        prof = purification_profile(c)
        ent = np.array(prof.entropy)
        assert set(ent.tolist()) <= {0, 1}
        assert np.all(np.diff(ent) <= 0)
        if prof.purifies:
            t = prof.time
            assert ent[t] == 0 and (t == 0 or ent[t - 1] == 1)


def _purify_fraction(L, px, n=200):
    return np.mean([purification_profile(build_direct_circuit(L, 0.15, px, s)).purifies for s in range(n)])


def test_pure_phase_purifies_more_often():
    pure = _purify_fraction(6, 1.0)
    mixed = _purify_fraction(6, 0.0)
    assert pure > 0.2 and mixed < pure


def test_optimizer_cancellations():
    assert merge_single_qubit([Clifford1q(0, HADAMARD), Clifford1q(0, HADAMARD)]) == []
    assert merge_single_qubit([Clifford1q(1, PHASE)] * 4) == []
    kept = merge_single_qubit([Clifford1q(0, HADAMARD), Clifford1q(1, HADAMARD)])
    assert len(kept) == 2


def test_optimizer_preserves_state():
    for seed in range(100):
        raw = generate_circuit(4, 0.3, 0.5, seed, n_gates=10, optimize=False)
        opt = optimize_circuit(raw)
        opt.validate()
        assert len(opt.ops) <= len(raw.ops)
        a, b = Tableau(raw.n_qubits), Tableau(raw.n_qubits)
        run(raw.ops, a)
        run(opt.ops, b)
        assert same_up_to_phase(tableau_to_statevector(a).psi, tableau_to_statevector(b).psi)


def test_serialization_round_trip_and_determinism():
    for seed in range(20):
        c = generate_circuit(6, 0.2, 0.5, seed)
        text = dumps(c)
        assert dumps(loads(text)) == text
        assert loads(text) == c
        assert dumps(generate_circuit(6, 0.2, 0.5, seed)) == text


def test_malformed_circuit_text():
    with pytest.raises(CircuitFormatError):
        loads("not a circuit")


def test_truncate_evolution():
    c = generate_circuit(6, 0.4, 0.5, 5)
    t = truncate_evolution(c, 4)
    assert t.n_steps == 4
    assert sum(isinstance(o, XX) for o in t.segment("evolution")) == 4
    assert "feedback" not in t.segments
    t.validate()
    with pytest.raises(ValueError):
        truncate_evolution(c, c.n_steps + 1)


def test_validate_rejects_reference_measurement():
    c = Circuit(2, [MeasureDirect(2, Basis.Z)])
    with pytest.raises(ValueError):
        c.validate()
