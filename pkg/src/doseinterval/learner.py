"""Difference-of-convex fitting of one-sided and two-sided dose-interval bounds.

The bound function lives in a kernel expansion f(x) = sum_j v_j k(x, X_j) + v0.
Each outer iteration linearizes the concave part of the truncated hinge at the
current iterate, which reduces to a box-and-equality QP in dual variables
beta; the expansion coefficients are recovered as v = -beta and the intercept
by an exact piecewise-linear line search. A step-halving guard keeps the
primal objective nonincreasing even when the inner QP is solved inexactly.

Upper bounds reuse the lower-bound fitter on negated doses. Two-sided fits
split the sample at an estimated dose-response peak and fit the two bounds
on the two halves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .kernels import gram, median_heuristic
from .losses import weighted_losses
from .qp import QpProblem, solve_qp
from .types import (
    GAUSSIAN,
    LOWER,
    TWO_SIDED,
    UPPER,
    Dataset,
    IntervalPolicyModel,
    KernelExpansion,
    KernelSpec,
    SurrogateConfig,
    ThresholdSpec,
    ValidationError,
    validate_dataset,
)

INIT_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
MAX_STEP_HALVINGS = 20
QP_SWEEPS = 60
QP_BASE_TOL = 1e-6
MIDPOINT_GRID_POINTS = 200


@dataclass(frozen=True)
class DcState:
    """Snapshot of one accepted outer iteration."""

    iteration: int
    coef: np.ndarray
    intercept: float
    q_upper: np.ndarray
    q_lower: np.ndarray
    objective: float
    converged: bool


def resolve_kernel(spec: KernelSpec, x: np.ndarray) -> KernelSpec:
    """Fill in the Gaussian bandwidth with the median heuristic if unset."""
    if spec.kind == GAUSSIAN and spec.gamma is None:
        return replace(spec, gamma=median_heuristic(x))
    return spec


def _pick_largest_minimizer(candidates: np.ndarray, values: np.ndarray) -> float:
    ties = np.flatnonzero(values == values.min())
    return float(candidates[ties].max())


class _LowerBoundProblem:
    """Precomputed pieces of one lower-bound fit."""

    def __init__(self, data: Dataset, config: SurrogateConfig, s_values: np.ndarray):
        self.data = data
        self.alpha = config.alpha
        self.lam = config.lam
        self.eps = config.resolved_epsilon(data.dose_bounds, data.n)
        self.kernel = resolve_kernel(config.kernel, data.x)
        self.k = gram(self.kernel, data.x)
        self.above = data.y > s_values
        w = data.weights
        self.h = (1.0 - self.alpha) * self.above * w / self.lam
        self.h_tilde = self.alpha * (~self.above) * w / self.lam

    def loss(self, f: np.ndarray) -> float:
        return float(
            weighted_losses(
                f, self.data.a, self.above, self.data.weights, self.alpha, self.eps, "lower"
            ).sum()
        )

    def objective(self, kv: np.ndarray, vkv: float, intercept: float) -> float:
        return self.loss(kv + intercept) + 0.5 * self.lam * vkv

    def indicator_scales(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        q_upper = (f - self.data.a > self.eps) / self.eps
        q_lower = (self.data.a - f > self.eps) / self.eps
        return q_upper, q_lower

    def line_search_intercept(self, kv: np.ndarray, current: float) -> float:
        """Exact minimization over the intercept of the piecewise-linear loss.

        Breakpoints sit where a ramp of either hinge starts or ends; the
        global minimum over the reals is attained on the breakpoint set.
        Ties break toward the largest minimizer.
        """
        r = self.data.a - kv
        candidates = np.unique(np.concatenate([r, r - self.eps, r + self.eps, [current]]))
        values = np.empty(candidates.shape[0])
        chunk = max(1, 2_000_000 // max(self.data.n, 1))
        for start in range(0, candidates.shape[0], chunk):
            block = candidates[start : start + chunk]
            f = kv[None, :] + block[:, None]
            losses = weighted_losses(
                f,
                self.data.a[None, :],
                self.above[None, :],
                self.data.weights[None, :],
                self.alpha,
                self.eps,
                "lower",
            )
            values[start : start + block.shape[0]] = losses.sum(axis=1)
        return _pick_largest_minimizer(candidates, values)


def _initial_intercept(problem: _LowerBoundProblem, init: Optional[float]) -> float:
    if init is not None:
        return float(init)
    candidates = np.unique(np.quantile(problem.data.a, INIT_QUANTILES))
    zeros = np.zeros(problem.data.n)
    values = np.array([problem.objective(zeros, 0.0, c) for c in candidates])
    return _pick_largest_minimizer(candidates, values)


def _constant_bound_model(
    data: Dataset,
    config: SurrogateConfig,
    threshold: ThresholdSpec,
    level: float,
    side: str,
) -> IntervalPolicyModel:
    try:
        kernel = resolve_kernel(config.kernel, data.x)
    except ValidationError:
        kernel = replace(config.kernel, gamma=1.0)  # coef is zero; bandwidth is moot
    expansion = KernelExpansion(kernel, np.zeros(data.n), float(level), data.x)
    if side == LOWER:
        return IntervalPolicyModel(
            LOWER, config.alpha, data.dose_bounds, threshold, lower=expansion
        )
    return IntervalPolicyModel(UPPER, config.alpha, data.dose_bounds, threshold, upper=expansion)


def fit_lower(
    data: Dataset,
    config: SurrogateConfig,
    threshold: ThresholdSpec,
    init: Optional[float] = None,
    trace: Optional[list[DcState]] = None,
) -> IntervalPolicyModel:
    """Fit the lower bound of a one-sided dose interval.

    Requires weights on the dataset. Returns a model whose recommended
    interval is [f_L(x), a_U]. If every outcome falls on one side of the
    threshold the objective is minimized at a constant boundary bound,
    returned directly with a warning.
    """
    data = validate_dataset(data)
    if data.weights is None:
        raise ValidationError("fit_lower requires weights; estimate or supply them first")
    s_values = threshold.values(data.x)
    above = data.y > s_values
    if above.all():
        warnings.warn(
            "all outcomes above the threshold; returning the constant lower bound a_L",
            RuntimeWarning,
            stacklevel=2,
        )
        return _constant_bound_model(data, config, threshold, data.dose_bounds[0], LOWER)
    if not above.any():
        warnings.warn(
            "all outcomes at or below the threshold; returning the constant lower bound a_U",
            RuntimeWarning,
            stacklevel=2,
        )
        return _constant_bound_model(data, config, threshold, data.dose_bounds[1], LOWER)

    problem = _LowerBoundProblem(data, config, s_values)
    n = data.n
    coef = np.zeros(n)
    kv = np.zeros(n)
    vkv = 0.0
    intercept = _initial_intercept(problem, init)
    objective = problem.objective(kv, vkv, intercept)
    # KKT residuals live in gradient units; near the optimum those track the
    # linear term, not the (possibly enormous) dual box
    qp_tol = QP_BASE_TOL * max(1.0, float(np.max(np.abs(data.a))))

    prev_masks: Optional[tuple[np.ndarray, np.ndarray]] = None
    converged = False
    for iteration in range(config.max_dc_iters):
        q_upper, q_lower = problem.indicator_scales(kv + intercept)
        if prev_masks is not None and np.array_equal(prev_masks[0], q_upper) and np.array_equal(
            prev_masks[1], q_lower
        ):
            converged = True
            break
        prev_masks = (q_upper, q_lower)

        center = problem.h_tilde * q_lower - problem.h * q_upper
        qp = QpProblem(
            problem.k,
            data.a,
            center - problem.h_tilde / problem.eps,
            center + problem.h / problem.eps,
        )
        solution = solve_qp(qp, tol=qp_tol, max_sweeps=QP_SWEEPS)
        new_coef = -solution.beta
        new_kv = problem.k @ new_coef
        new_vkv = float(new_coef @ new_kv)
        new_intercept = problem.line_search_intercept(new_kv, intercept)
        new_objective = problem.objective(new_kv, new_vkv, new_intercept)

        if new_objective > objective:
            # inexact inner solve: halve toward the proposal until descent
            accepted = False
            cross = float(coef @ new_kv)
            step = 1.0
            for _ in range(MAX_STEP_HALVINGS):
                step *= 0.5
                try_coef = coef + step * (new_coef - coef)
                try_kv = kv + step * (new_kv - kv)
                try_vkv = (
                    (1 - step) ** 2 * vkv + 2 * step * (1 - step) * cross + step**2 * new_vkv
                )
                try_intercept = problem.line_search_intercept(try_kv, intercept)
                try_objective = problem.objective(try_kv, try_vkv, try_intercept)
                if try_objective <= objective:
                    new_coef, new_kv, new_vkv = try_coef, try_kv, try_vkv
                    new_intercept, new_objective = try_intercept, try_objective
                    accepted = True
                    break
            if not accepted:
                converged = True
                break

        decrease = objective - new_objective
        coef, kv, vkv = new_coef, new_kv, new_vkv
        intercept, objective = new_intercept, new_objective
        converged = decrease < config.descent_tolerance * max(1.0, abs(objective))
        if trace is not None:
            trace.append(
                DcState(iteration, coef.copy(), intercept, q_upper, q_lower, objective, converged)
            )
        if converged:
            break

    expansion = KernelExpansion(problem.kernel, coef, intercept, data.x)
    return IntervalPolicyModel(LOWER, config.alpha, data.dose_bounds, threshold, lower=expansion)


def _negate_dataset(data: Dataset) -> Dataset:
    lo, hi = data.dose_bounds
    return Dataset(data.x, -data.a, data.y, data.weights, (-hi, -lo))


def fit_upper(
    data: Dataset,
    config: SurrogateConfig,
    threshold: ThresholdSpec,
    init: Optional[float] = None,
    trace: Optional[list[DcState]] = None,
) -> IntervalPolicyModel:
    """Fit the upper bound of a one-sided interval [a_L, f_U(x)].

    Negating the dose axis turns the upper bound into the lower bound of
    the negated problem; outcome labels are untouched.
    """
    negated = fit_lower(
        _negate_dataset(validate_dataset(data)),
        config,
        threshold,
        None if init is None else -float(init),
        trace,
    )
    inner = negated.lower
    expansion = KernelExpansion(inner.kernel, -inner.coef, -inner.intercept, inner.train_x)
    return IntervalPolicyModel(
        UPPER, config.alpha, data.dose_bounds, threshold, upper=expansion
    )


Midpoint = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def fit_two_sided(
    data: Dataset,
    config: SurrogateConfig,
    threshold: ThresholdSpec,
    midpoint: Midpoint,
) -> IntervalPolicyModel:
    """Fit both interval bounds by splitting the sample at a midpoint dose.

    Rows with dose at or below the midpoint train the lower bound; rows
    above it train the upper bound. The midpoint is a per-row dose vector
    or a function of the covariates, strictly inside the dose range.
    """
    data = validate_dataset(data)
    mid = midpoint(data.x) if callable(midpoint) else np.asarray(midpoint, dtype=float)
    mid = mid.reshape(-1)
    if mid.shape[0] != data.n:
        raise ValidationError(f"midpoint length {mid.shape[0]} != n={data.n}")
    lo, hi = data.dose_bounds
    if np.any(~np.isfinite(mid)) or np.any(mid < lo) or np.any(mid > hi):
        raise ValidationError("midpoint outside dose bounds")
    eps = config.resolved_epsilon(data.dose_bounds, data.n)
    shared = replace(config, epsilon=eps)

    lower_rows = data.a <= mid
    upper_rows = ~lower_rows
    if not lower_rows.any() or not upper_rows.any():
        raise ValidationError("empty split side: midpoint leaves no samples for one bound")

    lower_data = data.subset(lower_rows).with_dose_bounds((lo, float(mid.max())))
    upper_data = data.subset(upper_rows).with_dose_bounds((float(mid.min()), hi))
    lower_model = fit_lower(lower_data, shared, threshold)
    upper_model = fit_upper(upper_data, shared, threshold)
    return IntervalPolicyModel(
        TWO_SIDED,
        config.alpha,
        data.dose_bounds,
        threshold,
        lower=lower_model.lower,
        upper=upper_model.upper,
    )


def estimate_midpoint(data: Dataset, config: SurrogateConfig) -> np.ndarray:
    """Plug-in estimate of the dose with the best expected outcome, per row.

    Quadratic-in-dose least squares with dose-covariate interactions,
    maximized over an even dose grid and clipped off the range endpoints.
    Flat fits break ties toward the lowest grid index.
    """
    data = validate_dataset(data)
    lo, hi = data.dose_bounds
    eps = config.resolved_epsilon(data.dose_bounds, data.n)
    n = data.n
    design = np.column_stack(
        [np.ones(n), data.a, data.a**2, data.x, data.a[:, None] * data.x]
    )
    coef, _, rank, _ = np.linalg.lstsq(design, data.y, rcond=None)
    if rank < design.shape[1]:
        gram_ = design.T @ design + 1e-8 * np.eye(design.shape[1])
        coef = np.linalg.solve(gram_, design.T @ data.y)
    slope = coef[1] + data.x @ coef[3 + data.d :]
    curvature = coef[2]
    grid = np.linspace(lo, hi, MIDPOINT_GRID_POINTS)
    scores = slope[:, None] * grid[None, :] + curvature * grid[None, :] ** 2
    best = grid[np.argmax(scores, axis=1)]
    return np.clip(best, lo + eps, hi - eps)
