"""Sparse-grid algorithms and brute-force oracles for tensor product problems."""

from .algorithm import TensorAlgorithm
from .errors import (
    AlreadySatisfiedError,
    AnchorPointError,
    AssemblyError,
    ConditioningError,
    ConfigError,
    DomainError,
    DuplicatePointsError,
    FitError,
    GapViolation,
    NumericalFailure,
    RateFailure,
    ResolutionError,
    SaturationWarning,
    StructuralError,
    TensorQPTError,
)
from .kernels import Kernel, eval_kernel, gram, kernel_preset, rank_one_modify, select_anchor, sobolev_kernel, tabulated_kernel
from .oracle import initial_error, operator_norm, worst_case_error
from .qpt import Pattern, QptPlan, assemble_qpt_algorithm, choose_n, index_count, qpt_envelope_fit, truncation_level
from .smolyak import RateFit, build_univariate_sequence, enumerate_index_set, fit_rate, smolyak_algorithm
from .spectral import check_eigenfunction_point_condition, discretize_problem, eigensystem, estimate_decay
from .univariate import build_split, minimal_error_curve, select_points_greedy, univariate_algorithm

__version__ = "0.1.0"

__all__ = [
    "AlreadySatisfiedError",
    "AnchorPointError",
    "AssemblyError",
    "ConditioningError",
    "ConfigError",
    "DomainError",
    "DuplicatePointsError",
    "FitError",
    "GapViolation",
    "Kernel",
    "NumericalFailure",
    "Pattern",
    "QptPlan",
    "RateFailure",
    "RateFit",
    "ResolutionError",
    "SaturationWarning",
    "StructuralError",
    "TensorAlgorithm",
    "TensorQPTError",
    "assemble_qpt_algorithm",
    "build_split",
    "build_univariate_sequence",
    "check_eigenfunction_point_condition",
    "choose_n",
    "discretize_problem",
    "eigensystem",
    "enumerate_index_set",
    "estimate_decay",
    "eval_kernel",
    "fit_rate",
    "gram",
    "index_count",
    "initial_error",
    "kernel_preset",
    "minimal_error_curve",
    "operator_norm",
    "qpt_envelope_fit",
    "rank_one_modify",
    "select_anchor",
    "select_points_greedy",
    "smolyak_algorithm",
    "sobolev_kernel",
    "tabulated_kernel",
    "truncation_level",
    "univariate_algorithm",
    "worst_case_error",
]
