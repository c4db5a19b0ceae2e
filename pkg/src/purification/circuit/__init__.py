from .execute import (
    DEFAULT_BRANCH_CAP,
    Branch,
    BranchCapExceeded,
    apply_op,
    direct_form,
    enumerate_deferred,
    enumerate_direct,
    run,
)
from .feedback import (
    FeedbackPlan,
    NonAffineFeedback,
    PurificationProfile,
    append_feedback,
    fit_affine,
    plan_from_truth_table,
    purification_profile,
    synthesize_feedback,
)
from .generate import (
    MeasurementPolicy,
    build_bell_prep,
    build_direct_circuit,
    build_scrambler,
    defer_measurements,
    generate_circuit,
    sample_evolution,
)
from .ops import (
    CNOT,
    SEGMENTS,
    XX,
    Align,
    Circuit,
    Clifford1q,
    DeferredMeasure,
    GateOp,
    MeasureDirect,
    XGate,
    ng_for,
    truncate_evolution,
)
from .optimize import merge_single_qubit, optimize_circuit
from .serialize import CircuitFormatError, dumps, loads

__all__ = [name for name in dir() if not name.startswith("_")]
