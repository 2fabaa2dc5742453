"""Direct policy learning of individualized dose intervals.

Fits covariate-dependent dose-interval bounds by minimizing an
inverse-propensity-weighted truncated-hinge risk with a
difference-of-convex algorithm over kernel policy classes, alongside an
indirect classify-then-search benchmark and a simulation harness with
analytic oracles.
"""

from .types import (
    ConstantThreshold,
    Dataset,
    IntervalPolicyModel,
    KernelExpansion,
    KernelSpec,
    PolynomialThreshold,
    SurrogateConfig,
    ValidationError,
    evaluate_threshold,
    fit_threshold,
    validate_dataset,
)
from .kernels import gram, median_heuristic
from .losses import LossTerms, primal_objective, psi_eps, psi_eps_parts, psi_in, psi_out
from .qp import InfeasibleError, QpProblem, QpSolution, solve_qp
from .learner import (
    DcState,
    estimate_midpoint,
    fit_lower,
    fit_two_sided,
    fit_upper,
)
from .weights import PropensityModel, compute_weights, density, fit_propensity
from .indirect import IndirectModel, extract_lower_bound, fit_indirect, predict_prob
from .simulate import ScenarioSpec, generate, true_inverse_density, true_prob_above
from .evaluation import RiskReport, benchmark, cross_validate, empirical_risk, fit_method

__all__ = [
    "ConstantThreshold",
    "Dataset",
    "DcState",
    "IndirectModel",
    "InfeasibleError",
    "IntervalPolicyModel",
    "KernelExpansion",
    "KernelSpec",
    "LossTerms",
    "PolynomialThreshold",
    "PropensityModel",
    "QpProblem",
    "QpSolution",
    "RiskReport",
    "ScenarioSpec",
    "SurrogateConfig",
    "ValidationError",
    "benchmark",
    "compute_weights",
    "cross_validate",
    "density",
    "empirical_risk",
    "estimate_midpoint",
    "evaluate_threshold",
    "extract_lower_bound",
    "fit_indirect",
    "fit_lower",
    "fit_method",
    "fit_propensity",
    "fit_threshold",
    "fit_two_sided",
    "fit_upper",
    "generate",
    "gram",
    "median_heuristic",
    "predict_prob",
    "primal_objective",
    "psi_eps",
    "psi_eps_parts",
    "psi_in",
    "psi_out",
    "solve_qp",
    "true_inverse_density",
    "true_prob_above",
    "validate_dataset",
]

__version__ = "0.1.0"
