"""Recursive ensemble learning flows with memory.

Second- and higher-order boosting recursions in kernel function spaces,
with companion-matrix stability analysis, computable generalization and
stability bounds, a continuous-time limit study, and a reproducible
experiment harness.
"""

from .algorithms import (
    TrainConfig,
    TrainedEnsemble,
    TraceRecord,
    fibonacci_weights,
    static_weight_baseline,
    train,
)
from .core import (
    Dataset,
    DimensionMismatch,
    EnsembleState,
    FeatureMap,
    KernelSpec,
    RepresentationMismatch,
    RkhsFunction,
    combine,
    evaluate,
    inner,
)
from .diagnostics import (
    BoundInputs,
    BoundReport,
    compute_bound_report,
    convergence_monitor,
    descent_check,
    empirical_loo_perturbation,
    rademacher_bound,
    stability_bound,
)
from .harness import (
    ConfigError,
    DataSpec,
    ExperimentConfig,
    generate_data,
    run_experiment,
)
from .learners import (
    BaseLearnerConfig,
    FitError,
    LossSpec,
    ResidualVector,
    fit_base_learner,
    pseudo_residuals,
    weak_learning_check,
)
from .odelimit import LimitStudy, OdeParams, discretized_recursion, limit_study, simulate_ode
from .recursion import (
    AlphaMatrix,
    RecursionSchedule,
    alpha_matrix,
    orthogonalize,
    rao_blackwell_average,
    reconstruct,
    step,
)
from .spectral import (
    GOLDEN_RATIO,
    CompanionMatrix,
    SpectralReport,
    StepSchedule,
    characteristic_roots,
    golden_threshold_check,
    is_stable,
    make_schedule,
    power_envelope,
    spectral_radius,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaMatrix",
    "BaseLearnerConfig",
    "BoundInputs",
    "BoundReport",
    "CompanionMatrix",
    "ConfigError",
    "DataSpec",
    "Dataset",
    "DimensionMismatch",
    "EnsembleState",
    "ExperimentConfig",
    "FeatureMap",
    "FitError",
    "GOLDEN_RATIO",
    "KernelSpec",
    "LimitStudy",
    "LossSpec",
    "OdeParams",
    "RecursionSchedule",
    "RepresentationMismatch",
    "ResidualVector",
    "RkhsFunction",
    "SpectralReport",
    "StepSchedule",
    "TraceRecord",
    "TrainConfig",
    "TrainedEnsemble",
    "alpha_matrix",
    "characteristic_roots",
    "combine",
    "compute_bound_report",
    "convergence_monitor",
    "descent_check",
    "discretized_recursion",
    "empirical_loo_perturbation",
    "evaluate",
    "fibonacci_weights",
    "fit_base_learner",
    "generate_data",
    "golden_threshold_check",
    "inner",
    "is_stable",
    "limit_study",
    "make_schedule",
    "orthogonalize",
    "power_envelope",
    "pseudo_residuals",
    "rademacher_bound",
    "rao_blackwell_average",
    "reconstruct",
    "run_experiment",
    "simulate_ode",
    "spectral_radius",
    "stability_bound",
    "static_weight_baseline",
    "step",
    "train",
    "weak_learning_check",
]
