"""Online gradient descent control of linear dynamical systems.

Implements a two-level online-gradient-descent controller for plants
x_t = A x_{t-1} + B u_t under time-varying strongly convex tracking costs,
together with hindsight benchmarks (offline optimal trajectory, pointwise
optima) and a certificate engine that evaluates the closed-form regret bound
on recorded runs.
"""

from ._backend import HAVE_COMPILED, default_backend
from .cost_model import (
    CostSequence,
    Moduli,
    PathMetrics,
    QuadraticTrackingCost,
    SeparableCost,
    check_steady_state,
    generate_random_setpoints,
    load_schedule,
    path_metrics,
    save_schedule,
    setpoint_from_input,
)
from .errors import (
    CertificateUnavailableError,
    NoConvergenceError,
    NotControllableError,
    NumericalFailureError,
    SteadyStateUnderdeterminedError,
)
from .lin_system import (
    ControllabilityData,
    LinearSystem,
    build_controllability,
    check_assumption3,
    load_system,
    spectral_norm,
    step,
)
from .offline_oracle import OptimalTrajectory, comparator_regret, optimal_trajectory, regret
from .ogd_controller import OGDController, predict_state_recursive, validate_step_sizes
from .regret_cert import (
    RegretCertificate,
    attach_run,
    compute_constants,
    lemma_bound_check,
    proof_inequality_diagnostics,
    verify_bound,
)
from .sim_harness import (
    RunConfig,
    RunRecord,
    SetpointSpec,
    SweepRecord,
    demo_system,
    experiment_pathlength,
    experiment_tracking,
    export,
    load_trajectory,
    run_closed_loop,
)

__version__ = "0.1.0"

__all__ = [
    "CertificateUnavailableError",
    "ControllabilityData",
    "CostSequence",
    "HAVE_COMPILED",
    "LinearSystem",
    "Moduli",
    "NoConvergenceError",
    "NotControllableError",
    "NumericalFailureError",
    "OGDController",
    "OptimalTrajectory",
    "PathMetrics",
    "QuadraticTrackingCost",
    "RegretCertificate",
    "RunConfig",
    "RunRecord",
    "SeparableCost",
    "SetpointSpec",
    "SteadyStateUnderdeterminedError",
    "SweepRecord",
    "attach_run",
    "build_controllability",
    "check_assumption3",
    "check_steady_state",
    "comparator_regret",
    "compute_constants",
    "default_backend",
    "demo_system",
    "experiment_pathlength",
    "experiment_tracking",
    "export",
    "generate_random_setpoints",
    "lemma_bound_check",
    "load_schedule",
    "load_system",
    "load_trajectory",
    "optimal_trajectory",
    "path_metrics",
    "predict_state_recursive",
    "proof_inequality_diagnostics",
    "regret",
    "run_closed_loop",
    "save_schedule",
    "setpoint_from_input",
    "spectral_norm",
    "step",
    "validate_step_sizes",
    "verify_bound",
]
