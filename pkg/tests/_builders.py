"""Shared circuit fixtures and independent checkers for the test modules."""

import numpy as np

from purification.circuit import (
    CNOT,
    Circuit,
    Clifford1q,
    MeasureDirect,
    defer_measurements,
    enumerate_deferred,
    run,
)
from purification.scaling import TauCell, TauTable
from purification.stabilizer import Basis, PauliString, Tableau
from purification.stabilizer.cliffords import HADAMARD, PAULI_Z

# record (b1 b2 b3) -> reference bit
S1_TABLE = {
    (0, 0, 1): 0, (0, 1, 0): 0, (1, 0, 1): 0, (1, 1, 0): 0,
    (0, 0, 0): 1, (0, 1, 1): 1, (1, 0, 0): 1, (1, 1, 1): 1,
}


def s1_circuit() -> Circuit:
    """L=4 circuit whose reference sign is NOT(b2 xor b3) in the X basis.

    The reference is Bell-paired with qubit 0, which is spread onto qubit 1
    by a CNOT; measuring X on 0 and 1 pins the reference's X eigenvalue to
    the parity of those two outcomes.  Qubit 2 is an unrelated Z measurement.
    """
    L, R = 4, 4
    ops = [
        Clifford1q(R, HADAMARD), CNOT(R, 0),
        CNOT(0, 1), Clifford1q(2, HADAMARD), Clifford1q(R, PAULI_Z),
        MeasureDirect(2, Basis.Z), MeasureDirect(0, Basis.X), MeasureDirect(1, Basis.X),
    ]
    segs = {"bell": (0, 2), "scrambler": (2, 5), "evolution": (5, 8)}
    return defer_measurements(Circuit(L, ops, segments=segs, n_steps=0))


def feedback_failures(c: Circuit) -> list[str]:
    """Branch-by-branch check that the reference ends in |0> and is disentangled."""
    problems = []
    ref = c.reference
    for br in enumerate_deferred(c):
        t = br.state
        if t.expectation(PauliString.single(t.n, ref, Basis.Z)) != 1:
            problems.append(f"record {br.record}: reference not in |0>")
        if t.entropy([ref]) != 0:
            problems.append(f"record {br.record}: reference entropy nonzero")
    # disentangled from ancillae before readout: pure reference in the joint state
    full = Tableau(c.n_qubits)
    run(c.ops, full)
    if full.entropy([ref]) != 0 or full.expectation(PauliString.single(full.n, ref, Basis.Z)) != 1:
        problems.append("reference entangled with the ancilla register")
    return problems


def same_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-10) -> bool:
    k = int(np.argmax(np.abs(v)))
    if abs(u[k]) < tol:
        return False
    return bool(np.allclose(u * (v[k] / u[k]), v, atol=tol))


def planted_table(pxc=0.7, z=0.2, nu=0.5, sizes=(16, 32, 64), pxs=(0.6, 0.65, 0.7, 0.75, 0.8), p=0.15):
    """tau table built exactly from tau = L^z f((px - pxc) L^(z/nu))."""
    def f(x):
        return 3.0 * np.exp(-1.2 * x) + 1.0

    cells = [
        TauCell(L, float(px), float(L**z * f((px - pxc) * L ** (z / nu))), 0.01, 1.0, 100)
        for L in sizes
        for px in pxs
    ]
    return TauTable(p, cells)


def exp_curve_csv(tau: float = 10.0, T: int = 100) -> str:
    """Curve file for S(t) = exp(-t/tau), t = 0..T, zero standard errors."""
    lines = ['# {"source": "synthetic", "tau": %r}' % tau, "t,mean,stderr"]
    lines += [f"{t},{float(np.exp(-t / tau))!r},0.0" for t in range(T + 1)]
    return "\n".join(lines) + "\n"


# PASS/FAIL lines from the acceptance module, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []
