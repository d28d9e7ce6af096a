"""Simulation of seller-side experiments on platforms with pacing feedback."""

from .core import (
    CONTROL,
    GC,
    GT,
    INTERLEAVING,
    NAIVE,
    OTHER,
    TREATMENT,
    BatchResult,
    Scenario,
    TimeGrid,
    Trajectory,
    integrate,
    integrate_outcomes,
    simulate_global,
    step_state,
)
from .designs import (
    Assignment,
    draw_assignments,
    merge_rankings,
    sample_assignment,
    simulate_design,
    simulate_interleaving,
    simulate_naive,
)
from .errors import (
    AssumptionError,
    CapacityError,
    ConfigParseError,
    ConfigurationError,
    DegenerateSampleError,
    InvalidInputError,
    PacingLabError,
    PreconditionError,
    SchemaError,
    StateError,
)
from .estimators import (
    AuditReport,
    DetectionReport,
    EstimateReport,
    NullCalibration,
    aa_twin,
    audit_assignments,
    calibrate_threshold,
    detect_interference,
    expected_gte_hat,
    gte_hat,
    gte_true,
    theorem_audit,
)
from .oracle import OracleResult, build_theorem_scenario, enumerate_expected_gte_hat, independent_loop
from .pacing import (
    AlphaScaled,
    ExponentialDamping,
    HyperbolicDamping,
    Identity,
    LambdaCalibration,
    LinearDamping,
    apply_pacing,
    lambda_update,
    make_policy,
    validate_assumptions,
)
from .presets import load_preset, preset_config, preset_names
from .scenario import build_scenario, load_scenario, save_config
from .selection import evaluate_selection, max_form, select_top1

__version__ = "0.1.0"
