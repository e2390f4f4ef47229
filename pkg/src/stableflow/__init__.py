"""stableflow: feasibility solver for multi-commodity network flow.

Relaxes conservation and capacity into a convex penalty, minimizes it, and
reads the answer off the minimizer: a zero minimum yields a feasible flow,
a nonzero stable minimum certifies that none exists.
"""

from .certify import (
    OracleSizeError,
    ResidualSummary,
    Verdict,
    VerdictKind,
    classify,
    default_zero_tolerance,
    desk_scale_batch,
    oracle_feasibility,
    render_verdict_report,
)
from .model import (
    Arc,
    Commodity,
    GenerationError,
    Instance,
    InstanceError,
    ParseError,
    ValidationError,
    generate_random_instance,
    parse_instance,
    serialize_instance,
)
from .pseudoflow import (
    IDENTITY_PROFILES,
    FeasibilityCheck,
    FlowDumpError,
    ObjectiveForm,
    ProfileError,
    Profiles,
    PseudoFlow,
    StabilityReport,
    UnsupportedProfilesError,
    check_feasible,
    congestion,
    default_use_threshold,
    excess,
    gradient,
    objective,
    parse_flow_dump,
    stability_report,
    write_flow_dump,
)
from .solvers import (
    Init,
    Method,
    SolveResult,
    SolverConfig,
    TraceRow,
    optimal_slack,
    projected_gradient_residual,
    solve,
    solve_coordinate,
    solve_pgd,
)

__version__ = "0.1.0"

__all__ = [
    "Arc",
    "Commodity",
    "FeasibilityCheck",
    "FlowDumpError",
    "GenerationError",
    "IDENTITY_PROFILES",
    "Init",
    "Instance",
    "InstanceError",
    "Method",
    "ObjectiveForm",
    "OracleSizeError",
    "ParseError",
    "ProfileError",
    "Profiles",
    "PseudoFlow",
    "ResidualSummary",
    "SolveResult",
    "SolverConfig",
    "StabilityReport",
    "TraceRow",
    "UnsupportedProfilesError",
    "ValidationError",
    "Verdict",
    "VerdictKind",
    "check_feasible",
    "classify",
    "congestion",
    "default_use_threshold",
    "default_zero_tolerance",
    "desk_scale_batch",
    "excess",
    "generate_random_instance",
    "gradient",
    "objective",
    "optimal_slack",
    "oracle_feasibility",
    "parse_flow_dump",
    "parse_instance",
    "projected_gradient_residual",
    "render_verdict_report",
    "serialize_instance",
    "solve",
    "solve_coordinate",
    "solve_pgd",
    "stability_report",
    "write_flow_dump",
]
