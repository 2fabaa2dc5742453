"""Empirical risk evaluation, cross-validated tuning, and the benchmark harness.

The 0-1 risk of an interval policy is the weighted mean of
``alpha * I(bad outcome) * I(dose inside)`` plus
``(1 - alpha) * I(good outcome) * I(dose outside)``; intervals are closed and
their complements strict. The benchmark evaluates fitted policies on large
fresh test draws with the generating process's own inverse-density weights,
normalized to mean one like every other weight vector in the pipeline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import simulate
from .indirect import IndirectModel, extract_lower_bound, fit_indirect
from .learner import fit_lower, resolve_kernel
from .losses import psi_eps, psi_in, psi_out
from .rng import child_seed, substream
from .types import (
    GAUSSIAN,
    LINEAR,
    LOWER,
    TWO_SIDED,
    UPPER,
    Dataset,
    IntervalPolicyModel,
    KernelSpec,
    SurrogateConfig,
    ThresholdSpec,
    ValidationError,
    fit_threshold,
    validate_dataset,
)
from .weights import compute_weights, fit_propensity

DIRECT_METHODS = ("lo-linear", "lo-gaussian")
METHODS = DIRECT_METHODS + ("indirect-logistic",)
LAMBDA_GRID_RAW = np.logspace(-3.0, 2.0, 7)
PENALTY_GRID = np.logspace(-4.0, -0.5, 7)


@dataclass(frozen=True)
class RiskReport:
    """Plug-in risks on one test set, with the error-mass breakdown."""

    zero_one_risk: float
    surrogate_risk: Optional[float]
    n_test: int
    false_positive_mass: float
    false_negative_mass: float
    alpha: float


def empirical_risk(
    model: IntervalPolicyModel,
    test: Dataset,
    threshold_values: Optional[np.ndarray] = None,
    eps: Optional[float] = None,
) -> RiskReport:
    """Weighted empirical risks of a fitted policy on a test set.

    ``threshold_values`` defaults to the model's stored threshold evaluated
    on the test covariates. Passing ``eps`` also reports the truncated-hinge
    surrogate risk at that width.
    """
    test = validate_dataset(test)
    if test.weights is None:
        raise ValidationError("risk evaluation requires weights on the test set")
    if threshold_values is None:
        threshold_values = model.threshold.values(test.x)
    s = np.asarray(threshold_values, dtype=float).reshape(-1)
    lo, hi = model.predict_bounds(test.x)
    if model.side == LOWER:
        inside = test.a >= lo
    elif model.side == UPPER:
        inside = test.a <= hi
    else:
        inside = (test.a >= lo) & (test.a <= hi)
    above = test.y > s
    w = test.weights
    n = test.n
    fp_mass = float(np.sum(w * (~above) * inside) / n)
    fn_mass = float(np.sum(w * above * ~inside) / n)
    alpha = model.alpha
    surrogate = None
    if eps is not None:
        if model.side == LOWER:
            fp = psi_eps(test.a, lo, eps)
            fn = psi_eps(lo, test.a, eps)
        elif model.side == UPPER:
            fp = psi_eps(hi, test.a, eps)
            fn = psi_eps(test.a, hi, eps)
        else:
            fp = psi_in(lo, test.a, hi, eps)
            fn = psi_out(lo, test.a, hi, eps)
        surrogate = float(np.mean(w * (alpha * (~above) * fp + (1 - alpha) * above * fn)))
    return RiskReport(
        zero_one_risk=alpha * fp_mass + (1 - alpha) * fn_mass,
        surrogate_risk=surrogate,
        n_test=n,
        false_positive_mass=fp_mass,
        false_negative_mass=fn_mass,
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CvRow:
    index: int
    tie_key: float
    mean_risk: float


def _stratified_folds(
    labels: np.ndarray, folds: int, seed: int
) -> np.ndarray:
    """Fold index per row; stratified by label, re-randomized on bad splits."""
    n = labels.shape[0]
    for attempt in range(10):
        rng = substream(seed, "folds", attempt)
        assignment = np.empty(n, dtype=int)
        position = 0
        for cls in (False, True):
            idx = np.flatnonzero(labels == cls)
            rng.shuffle(idx)
            assignment[idx] = (np.arange(idx.shape[0]) + position) % folds
            position += idx.shape[0]
        ok = all(
            np.unique(labels[assignment == f]).shape[0] == 2 or (assignment == f).sum() == 0
            for f in range(folds)
        )
        if ok:
            return assignment
    rng = substream(seed, "folds", "unstratified")
    assignment = np.arange(n) % folds
    rng.shuffle(assignment)
    return assignment


def cross_validate(
    data: Dataset,
    grid: Sequence,
    threshold: ThresholdSpec,
    fitter: Callable[[object, Dataset, ThresholdSpec], IntervalPolicyModel],
    tie_key: Callable[[object], float],
    folds: int = 5,
    seed: int = 0,
) -> tuple[object, list[CvRow]]:
    """Pick the grid item with the lowest held-out 0-1 risk.

    Folds are stratified by the good-outcome label. Held-out risk uses the
    weights already stored on the data. Exact ties break toward the larger
    tie key (more regularization).
    """
    data = validate_dataset(data)
    if data.n < folds:
        raise ValidationError(f"need n >= folds, got n={data.n}, folds={folds}")
    if not len(grid):
        raise ValidationError("empty hyperparameter grid")
    labels = data.y > threshold.values(data.x)
    assignment = _stratified_folds(labels, folds, seed)
    rows: list[CvRow] = []
    for index, item in enumerate(grid):
        risks = []
        for f in range(folds):
            train = data.subset(assignment != f)
            held = data.subset(assignment == f)
            if held.n == 0:
                continue
            model = fitter(item, train, threshold)
            risks.append(empirical_risk(model, held).zero_one_risk)
        rows.append(CvRow(index, float(tie_key(item)), float(np.mean(risks))))
    best = min(rows, key=lambda r: (r.mean_risk, -r.tie_key))
    return grid[best.index], rows


# ---------------------------------------------------------------------------
# Method fitting shared by the CLI and the benchmark
# ---------------------------------------------------------------------------

def lambda_grid(n: int) -> np.ndarray:
    return LAMBDA_GRID_RAW / n


def direct_config(method: str, alpha: float, lam: float, epsilon: Optional[float]) -> SurrogateConfig:
    kind = LINEAR if method == "lo-linear" else GAUSSIAN
    return SurrogateConfig(alpha=alpha, epsilon=epsilon, lam=lam, kernel=KernelSpec(kind))


def fit_method(
    method: str,
    train: Dataset,
    threshold: ThresholdSpec,
    alpha: float,
    seed: int,
    side: str = LOWER,
    epsilon: Optional[float] = None,
    folds: int = 5,
):
    """Cross-validate and fit one method on weighted training data.

    Returns ``(model, cv_rows)`` where the model is an IntervalPolicyModel
    for the direct methods and an IndirectModel for the classifier route.
    """
    from .learner import fit_two_sided, fit_upper, estimate_midpoint

    if method in DIRECT_METHODS:
        grid = [direct_config(method, alpha, lam, epsilon) for lam in lambda_grid(train.n)]
        if train.x.shape[0] and grid[0].kernel.kind == GAUSSIAN:
            gamma_kernel = resolve_kernel(grid[0].kernel, train.x)
            grid = [replace(c, kernel=gamma_kernel) for c in grid]

        def fit_one(config, subset, thr, full_side=side):
            if full_side == LOWER:
                return fit_lower(subset, config, thr)
            if full_side == UPPER:
                return fit_upper(subset, config, thr)
            return fit_two_sided(subset, config, thr, estimate_midpoint(subset, config))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            best, rows = cross_validate(
                train, grid, threshold, fit_one, lambda c: c.lam, folds=folds, seed=seed
            )
            model = fit_one(best, train, threshold)
        return model, rows
    if method == "indirect-logistic":
        if side != LOWER:
            raise ValidationError("the indirect benchmark implements lower bounds only")

        def fit_one(penalty, subset, thr):
            inner = fit_indirect(subset, thr, alpha=alpha, l1_penalty=float(penalty))
            return _IndirectAsPolicy(inner, thr, alpha)

        best, rows = cross_validate(
            train, list(PENALTY_GRID), threshold, fit_one, float, folds=folds, seed=seed
        )
        model = fit_indirect(train, threshold, alpha=alpha, l1_penalty=float(best))
        return model, rows
    raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")


class _IndirectAsPolicy:
    """Adapter giving the classifier the policy-evaluation surface."""

    def __init__(self, inner: IndirectModel, threshold: ThresholdSpec, alpha: float):
        self.inner = inner
        self.threshold = threshold
        self.alpha = alpha
        self.side = LOWER
        self.dose_bounds = inner.dose_bounds

    def predict_bounds(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = extract_lower_bound(self.inner, x)
        return lo, np.full(x.shape[0], self.dose_bounds[1])


def as_policy(model, threshold: ThresholdSpec, alpha: float):
    """Wrap an IndirectModel for risk evaluation; pass policies through."""
    if isinstance(model, IndirectModel):
        return _IndirectAsPolicy(model, threshold, alpha)
    return model


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkRow:
    scenario: str
    sigma2: float
    n: int
    d: int
    method: str
    mean_risk: float
    sd_risk: float
    n_reps: int
    n_fail: int


@dataclass(frozen=True)
class ReplicationResult:
    replication: int
    method: str
    risk: Optional[float]
    error: Optional[str]


def run_replication(
    spec: simulate.ScenarioSpec,
    replication: int,
    methods: Sequence[str],
    test_n: int,
    alpha: float,
    epsilon: Optional[float],
    folds: int,
) -> list[ReplicationResult]:
    """One paired replication: shared train/test draws across all methods."""
    train_spec = replace(spec, seed=child_seed(spec.seed, "train", replication))
    test_spec = replace(spec, n=test_n, seed=child_seed(spec.seed, "test", replication))
    train = simulate.generate(train_spec)
    test = simulate.generate(test_spec)
    threshold = fit_threshold(train.x, train.y)
    train = train.with_weights(compute_weights(fit_propensity(train), train))
    oracle_w = simulate.true_inverse_density(spec, test.a, test.x)
    test = test.with_weights(oracle_w / oracle_w.mean())
    s_test = threshold.values(test.x)

    results = []
    for method in methods:
        try:
            fit_seed = child_seed(spec.seed, "cv", replication, method)
            model, _ = fit_method(
                method, train, threshold, alpha, fit_seed, epsilon=epsilon, folds=folds
            )
            policy = as_policy(model, threshold, alpha)
            risk = empirical_risk(policy, test, threshold_values=s_test).zero_one_risk
            results.append(ReplicationResult(replication, method, float(risk), None))
        except Exception as exc:  # per-replication failures are recorded, not fatal
            results.append(ReplicationResult(replication, method, None, repr(exc)))
    return results


def benchmark(
    spec: simulate.ScenarioSpec,
    methods: Sequence[str] = METHODS,
    replications: int = 20,
    test_n: int = 10_000,
    alpha: float = 0.5,
    epsilon: Optional[float] = None,
    folds: int = 5,
    jobs: int = 1,
) -> tuple[list[BenchmarkRow], list[ReplicationResult]]:
    """Mean and sd of test risk per method over paired replications."""
    for method in methods:
        if method not in METHODS:
            raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    per_rep: list[list[ReplicationResult]] = [None] * replications  # type: ignore[list-item]
    if jobs > 1 and replications > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(
                    run_replication, spec, rep, tuple(methods), test_n, alpha, epsilon, folds
                )
                for rep in range(replications)
            ]
            for rep, future in enumerate(futures):
                per_rep[rep] = future.result()
    else:
        for rep in range(replications):
            per_rep[rep] = run_replication(
                spec, rep, tuple(methods), test_n, alpha, epsilon, folds
            )

    flat = [r for rep_results in per_rep for r in rep_results]
    rows = []
    for method in methods:
        risks = [r.risk for r in flat if r.method == method and r.risk is not None]
        failures = sum(1 for r in flat if r.method == method and r.risk is None)
        mean = float(np.mean(risks)) if risks else float("nan")
        sd = float(np.std(risks, ddof=1)) if len(risks) > 1 else 0.0
        rows.append(
            BenchmarkRow(
                spec.scenario, spec.sigma2, spec.n, spec.d, method, mean, sd, len(risks), failures
            )
        )
    return rows, flat


BENCHMARK_CSV_HEADER = "scenario,sigma2,n,d,method,mean_risk,sd_risk,n_reps,n_fail"


def rows_to_csv(rows: Sequence[BenchmarkRow]) -> str:
    lines = [BENCHMARK_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.scenario},{r.sigma2!r},{r.n},{r.d},{r.method},"
            f"{r.mean_risk!r},{r.sd_risk!r},{r.n_reps},{r.n_fail}"
        )
    return "\n".join(lines) + "\n"


def rows_to_table(rows: Sequence[BenchmarkRow]) -> str:
    """Plain-text summary, one line per (setting, method)."""
    lines = ["scenario  sigma2   n     d   method             mean (sd)        reps fail"]
    for r in rows:
        lines.append(
            f"{r.scenario:<9} {r.sigma2:<7.4g} {r.n:<5} {r.d:<3} {r.method:<18} "
            f"{r.mean_risk:.3f} ({r.sd_risk:.3f})   {r.n_reps:<4} {r.n_fail}"
        )
    return "\n".join(lines) + "\n"
