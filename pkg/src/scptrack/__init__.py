"""Sequential convex programming tracker for parametric NLPs.

The package solves min c.x s.t. g(x) + M.xi = 0, x in Omega for a moving
parameter xi by warm-started convex subproblems.  The headline variant
keeps an inexact equality Jacobian and repairs it with one adjoint
product per step; exact-Jacobian and Gauss-Newton baselines, a conic
interior-point subproblem solver, two benchmark problems and a CSV
emitting command line front end round out the toolbox.
"""

from .cascade import (
    CascadeConfig,
    CascadeDynamics,
    ClosedLoopPlant,
    cascade_problem,
    cascade_weights,
    control_slice,
    rk4_step,
    rk4_step_with_tangents,
    state_slice,
    steady_primal,
    steady_start,
    steady_state,
    terminal_ellipsoid,
)
from .config import ScenarioConfig, build_problem, load_scenario, parse_config_text
from .errors import (
    ConfigError,
    DimensionError,
    ModelError,
    OracleError,
    ProjectionError,
    ScpTrackError,
    StepError,
    UnsupportedObjectiveError,
    UsageError,
)
from .ipm import solve_subproblem
from .jacobians import (
    EvalCounters,
    HessianStrategy,
    IterateState,
    JacobianStrategy,
    adjoint_product,
    correction_vector,
    finite_difference_jacobian,
    full_jacobian,
    init_state,
    update_hessian,
    update_jacobian,
)
from .problem import (
    KKTResidual,
    LinearObjective,
    ParametricNLP,
    PrimalDual,
    QuadraticObjective,
    eval_constraints,
    kkt_residual,
    slack_reformulate,
)
from .region import (
    AffineInequality,
    ConvexRegion,
    Ellipsoid,
    SecondOrderCone,
    extend_region,
    project_region,
    region_violation,
)
from .subproblem import (
    ConvexSubproblem,
    SolveStatus,
    SolverOptions,
    SubproblemResiduals,
    SubproblemSolution,
    build_subproblem,
)
from .tracking import (
    FascpRecord,
    FascpTrace,
    TrackerConfig,
    TrackingTrace,
    TrackRecord,
    apcscp_step,
    fascp_solve,
    oracle_solution,
    pcscp_step,
    rtgn_step,
    track,
)
from .tutorial import TutorialGroundTruth, tutorial_problem, tutorial_solution

__version__ = "0.1.0"

__all__ = [
    "AffineInequality",
    "CascadeConfig",
    "CascadeDynamics",
    "ClosedLoopPlant",
    "ConfigError",
    "ConvexRegion",
    "ConvexSubproblem",
    "DimensionError",
    "Ellipsoid",
    "EvalCounters",
    "FascpRecord",
    "FascpTrace",
    "HessianStrategy",
    "IterateState",
    "JacobianStrategy",
    "KKTResidual",
    "LinearObjective",
    "ModelError",
    "OracleError",
    "ParametricNLP",
    "PrimalDual",
    "ProjectionError",
    "QuadraticObjective",
    "ScenarioConfig",
    "ScpTrackError",
    "SecondOrderCone",
    "SolveStatus",
    "SolverOptions",
    "StepError",
    "SubproblemResiduals",
    "SubproblemSolution",
    "TrackRecord",
    "TrackerConfig",
    "TrackingTrace",
    "TutorialGroundTruth",
    "UnsupportedObjectiveError",
    "UsageError",
    "adjoint_product",
    "apcscp_step",
    "build_problem",
    "build_subproblem",
    "cascade_problem",
    "cascade_weights",
    "control_slice",
    "correction_vector",
    "eval_constraints",
    "extend_region",
    "fascp_solve",
    "finite_difference_jacobian",
    "full_jacobian",
    "init_state",
    "kkt_residual",
    "load_scenario",
    "oracle_solution",
    "parse_config_text",
    "pcscp_step",
    "project_region",
    "region_violation",
    "rk4_step",
    "rk4_step_with_tangents",
    "rtgn_step",
    "slack_reformulate",
    "solve_subproblem",
    "state_slice",
    "steady_primal",
    "steady_start",
    "steady_state",
    "terminal_ellipsoid",
    "track",
    "tutorial_problem",
    "tutorial_solution",
    "update_hessian",
    "update_jacobian",
]
