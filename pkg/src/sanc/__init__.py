"""Stochastic adaptive cubic regularization with a negative-curvature fallback."""

from .cubic import CubicModel, cauchy_point, minimize_over_krylov, solve_tridiag_cubic
from .data import Dataset, map_labels, parse_libsvm
from .harness import ExperimentConfig, run_experiment, validate_config
from .lanczos import KrylovBasis, lanczos_expand, ritz_leftmost
from .linalg import LinearOperator
from .objectives import logistic_nonconvex, nonconvex_svm, synthetic_saddle
from .optimizers import SancConfig, Trace, run
from .sampling import BatchSpec, SamplingConstants, gradient_batch_size, hessian_batch_size

__all__ = [
    "BatchSpec", "CubicModel", "Dataset", "ExperimentConfig", "KrylovBasis", "LinearOperator",
    "SamplingConstants", "SancConfig", "Trace", "cauchy_point", "gradient_batch_size",
    "hessian_batch_size", "lanczos_expand", "logistic_nonconvex", "map_labels",
    "minimize_over_krylov", "nonconvex_svm", "parse_libsvm", "ritz_leftmost", "run",
    "run_experiment", "solve_tridiag_cubic", "synthetic_saddle", "validate_config",
]
