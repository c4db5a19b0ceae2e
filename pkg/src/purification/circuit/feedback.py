"""Classical feedback that rotates a purified reference onto |0>.

Once the reference is pure, its state in every branch is an eigenstate of a
single Pauli P (the same for all branches).  The eigenvalue sign is an affine
function of the measurement record over GF(2), so a CNOT from each ancilla in
the mask plus an optional X restores |0> coherently in the deferred circuit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..stabilizer import Basis, PauliString, Tableau
from .execute import DEFAULT_BRANCH_CAP, apply_op, direct_form, enumerate_direct
from .ops import CNOT, XX, Align, Circuit, GateOp, MeasureDirect, XGate


@dataclass(frozen=True)
class PurificationProfile:
    """Reference entropy after each evolution step along the all-zeros branch.

    ``entropy[t]`` is taken after ``t`` evolution gates (and the measurement
    that follows gate ``t``, if any).
    """

    entropy: tuple[int, ...]
    basis: Basis | None

    @property
    def purifies(self) -> bool:
        return bool(self.entropy) and self.entropy[-1] == 0

    @property
    def time(self) -> int | None:
        for t, s in enumerate(self.entropy):
            if s == 0:
                return t
        return None


def reference_basis(state: Tableau, ref: int) -> Basis | None:
    """The Pauli axis along which a pure reference points, or None if mixed."""
    for basis in (Basis.Z, Basis.X, Basis.Y):
        if state.expectation(PauliString.single(state.n, ref, basis)) != 0:
            return basis
    return None


def purification_profile(c: Circuit) -> PurificationProfile:
    """Run the direct form with every random outcome forced to 0.

    Purification is a property of the circuit: the reference entropy is the
    same on every branch, so one branch suffices.
    """
    d = direct_form(c)
    t = Tableau(c.L + 1)
    ref = c.reference
    lo, hi = d.segments.get("evolution", (len(d.ops), len(d.ops)))
    for op in d.ops[:lo]:
        apply_op(t, op)
    entropy = [t.entropy([ref])]
    seen_gate = False
    for op in d.ops[lo:hi]:
        if isinstance(op, XX):
            if seen_gate:
                entropy.append(t.entropy([ref]))
            seen_gate = True
            apply_op(t, op)
        elif isinstance(op, MeasureDirect):
            force = None if t.is_deterministic(op.q, op.basis) else 0
            t.measure(op.q, op.basis, force=force)
        else:
            apply_op(t, op)
    if seen_gate:
        entropy.append(t.entropy([ref]))
    else:
        entropy[0] = t.entropy([ref])
    basis = reference_basis(t, ref) if entropy[-1] == 0 else None
    return PurificationProfile(tuple(int(s) for s in entropy), basis)


@dataclass(frozen=True)
class FeedbackPlan:
    """Reference bit = offset XOR (parity of the record bits listed in mask).

    Mask entries index measurements in order (0-based), i.e. ancilla
    ``L + 1 + i``.
    """

    basis: Basis
    mask: tuple[int, ...]
    offset: int

    def predict(self, record) -> int:
        return (self.offset + sum(int(record[i]) for i in self.mask)) & 1


class NonAffineFeedback(ValueError):
    pass


def fit_affine(records: np.ndarray, values: np.ndarray) -> tuple[tuple[int, ...], int]:
    """Solve value = offset ^ (mask . record) over GF(2).

    ``records`` is (N, m) of 0/1; the reachable records need not span the
    whole space, in which case bits that are fixed are left out of the mask.
    Raises NonAffineFeedback when no affine function fits.
    """
    records = np.asarray(records, dtype=np.uint8).reshape(len(values), -1)
    values = np.asarray(values, dtype=np.uint8)
    n, m = records.shape
    aug = np.concatenate([np.ones((n, 1), np.uint8), records, values[:, None]], axis=1)
    cols = m + 1
    pivots = []
    row = 0
    for col in range(cols):
        hits = np.nonzero(aug[row:, col])[0]
        if hits.size == 0:
            continue
        r = row + hits[0]
        aug[[row, r]] = aug[[r, row]]
        others = np.nonzero(aug[:, col])[0]
        others = others[others != row]
        aug[others] ^= aug[row]
        pivots.append(col)
        row += 1
        if row == n:
            break
    if np.any(aug[row:, cols]):
        raise NonAffineFeedback("reference sign is not an affine function of the record")
    # free variables are set to 0, pivots read off directly
    coeffs = np.zeros(cols, np.uint8)
    for i, col in enumerate(pivots):
        coeffs[col] = aug[i, cols]
    mask = tuple(int(j) for j in np.nonzero(coeffs[1:])[0])
    return mask, int(coeffs[0])


def plan_from_truth_table(table: dict[tuple[int, ...], int], basis: Basis) -> FeedbackPlan:
    """Fit a plan to a record -> reference-bit table."""
    if not table:
        raise ValueError("empty truth table")
    keys = sorted(table)
    records = np.array(keys, dtype=np.uint8).reshape(len(keys), -1)
    values = np.array([table[k] for k in keys], dtype=np.uint8)
    mask, offset = fit_affine(records, values)
    return FeedbackPlan(basis, mask, offset)


def feedback_truth_table(c: Circuit, cap: int = DEFAULT_BRANCH_CAP) -> tuple[dict[tuple[int, ...], int], Basis]:
    """Reference bit (0 for the +1 eigenvalue) on every branch of a purifying circuit."""
    d = direct_form(c)
    profile = purification_profile(c)
    if not profile.purifies:
        raise ValueError("circuit does not purify the reference")
    basis = profile.basis
    ref = c.reference
    table = {}
    for br in enumerate_direct(d, cap=cap):
        sign = br.state.expectation(PauliString.single(br.state.n, ref, basis))
        if sign == 0:
            raise RuntimeError("reference is not pure on every branch")
        table[br.record] = 0 if sign > 0 else 1
    return table, basis


def feedback_ops(c: Circuit, plan: FeedbackPlan) -> list[GateOp]:
    ref = c.reference
    ops: list[GateOp] = [Align(ref, plan.basis)]
    ops.extend(CNOT(c.L + 1 + i, ref) for i in plan.mask)
    if plan.offset:
        ops.append(XGate(ref))
    return ops


def synthesize_feedback(c: Circuit, cap: int = DEFAULT_BRANCH_CAP) -> tuple[FeedbackPlan, list[GateOp]]:
    table, basis = feedback_truth_table(c, cap)
    plan = plan_from_truth_table(table, basis)
    return plan, feedback_ops(c, plan)


def append_feedback(c: Circuit, cap: int = DEFAULT_BRANCH_CAP) -> Circuit:
    """Deferred circuit with the feedback segment appended."""
    if not c.is_deferred:
        raise ValueError("feedback is applied to the deferred circuit")
    if "feedback" in c.segments:
        raise ValueError("circuit already has feedback")
    _, ops = synthesize_feedback(c, cap)
    segs = dict(c.segments)
    segs["feedback"] = (len(c.ops), len(c.ops) + len(ops))
    return c.with_ops(c.ops + ops, segs)
