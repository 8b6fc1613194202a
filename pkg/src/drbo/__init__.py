"""Distributionally robust Bayesian optimization with divergence-ball ambiguity sets."""

from .acquisition import (
    ACQUISITION_TAGS,
    AcquisitionContext,
    AcquisitionKind,
    ExplorationSchedule,
    acq_value,
    acq_values,
    maximize_acq,
)
from .benchmarks import BenchmarkFunction, benchmark_names, evaluate, get_benchmark, observe
from .divergences import (
    ContextSet,
    DivergenceKind,
    DualPoint,
    RadiusSchedule,
    dual_objective,
    epsilon_at,
    gamma_inverse,
    gamma_map,
    phi,
    phi_conjugate,
    robust_value,
    robust_value_chi2,
    robust_value_kl,
    robust_value_tv,
    robust_values_rows,
    worst_case_oracle,
)
from .engine import (
    ExperimentConfig,
    RegretRecord,
    RobustRegretOracle,
    robust_regret_step,
    run_drbo,
    run_suite,
)
from .errors import ConfigurationError, DomainError, DrboError, NumericalError
from .gp import (
    Dataset,
    GpPosterior,
    KernelSpec,
    default_spec_grid,
    fit_hyperparams,
    gp_fit,
    gp_predict,
    gp_predict_batch,
    kernel_eval,
    kernel_matrix,
    log_marginal_likelihood,
)

__version__ = "0.1.0"
