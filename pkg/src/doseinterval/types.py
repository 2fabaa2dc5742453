"""Shared domain types: datasets, thresholds, kernel specs, configs, fitted models.

All types are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented contract."""


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out is arr and arr.flags.writeable:
        out = out.copy()
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Observational dose-response data.

    Attributes
    ----------
    x : ndarray of shape (n, d)
        Covariates.
    a : ndarray of shape (n,)
        Observed doses, each inside ``dose_bounds``.
    y : ndarray of shape (n,)
        Outcomes; larger is better.
    weights : ndarray of shape (n,), optional
        Estimates of the inverse treatment density 1/p(a|x). Strictly
        positive when present.
    dose_bounds : (float, float)
        Lower and upper limits of the admissible dose range.
    """

    x: np.ndarray
    a: np.ndarray
    y: np.ndarray
    weights: Optional[np.ndarray] = None
    dose_bounds: tuple[float, float] = (0.0, 1.0)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def with_weights(self, weights: np.ndarray) -> "Dataset":
        return validate_dataset(replace(self, weights=np.asarray(weights, dtype=float)))

    def subset(self, idx: np.ndarray) -> "Dataset":
        w = None if self.weights is None else self.weights[idx]
        return Dataset(self.x[idx], self.a[idx], self.y[idx], w, self.dose_bounds)

    def with_dose_bounds(self, bounds: tuple[float, float]) -> "Dataset":
        return validate_dataset(replace(self, dose_bounds=bounds))


def validate_dataset(raw: Dataset) -> Dataset:
    """Validate shapes, finiteness, dose support, and weight positivity.

    Returns a dataset backed by read-only float64 arrays. Errors name the
    offending row or column.
    """
    x = np.asarray(raw.x, dtype=float)
    a = np.asarray(raw.a, dtype=float).reshape(-1)
    y = np.asarray(raw.y, dtype=float).reshape(-1)
    if x.ndim != 2:
        raise ValidationError(f"covariates must be 2-d, got shape {x.shape}")
    n, d = x.shape
    if n < 1 or d < 1:
        raise ValidationError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if a.shape[0] != n:
        raise ValidationError(f"dose vector length {a.shape[0]} != n={n}")
    if y.shape[0] != n:
        raise ValidationError(f"outcome vector length {y.shape[0]} != n={n}")
    bad = np.argwhere(~np.isfinite(x))
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"non-finite covariate, row {i} column {j}")
    for name, v in (("dose", a), ("outcome", y)):
        nf = np.flatnonzero(~np.isfinite(v))
        if nf.size:
            raise ValidationError(f"non-finite {name}, row {nf[0]}")
    lo, hi = (float(raw.dose_bounds[0]), float(raw.dose_bounds[1]))
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise ValidationError(f"invalid dose bounds ({lo}, {hi})")
    out = np.flatnonzero((a < lo) | (a > hi))
    if out.size:
        raise ValidationError(f"dose out of bounds, row {out[0]}")
    w = raw.weights
    if w is not None:
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape[0] != n:
            raise ValidationError(f"weight vector length {w.shape[0]} != n={n}")
        bad_w = np.flatnonzero(~np.isfinite(w) | (w <= 0))
        if bad_w.size:
            raise ValidationError(f"non-positive weight, row {bad_w[0]}")
        w = _as_readonly(w)
    return Dataset(_as_readonly(x), _as_readonly(a), _as_readonly(y), w, (lo, hi))


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantThreshold:
    """Outcome threshold that ignores the covariates."""

    value: float

    def values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not math.isfinite(self.value):
            raise ValidationError("threshold value must be finite")
        return np.full(x.shape[0], float(self.value))


@dataclass(frozen=True)
class PolynomialThreshold:
    """Degree-2 threshold in the covariates: intercept + b'x + c'(x**2).

    Main effects and squares only; no cross terms.
    """

    intercept: float
    linear: np.ndarray
    square: np.ndarray

    def values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.linear, dtype=float).reshape(-1)
        c = np.asarray(self.square, dtype=float).reshape(-1)
        if x.ndim != 2 or x.shape[1] != b.shape[0] or b.shape[0] != c.shape[0]:
            raise ValidationError(
                f"threshold dimension mismatch: x has {x.shape[1] if x.ndim == 2 else '?'} "
                f"columns, coefficients have {b.shape[0]}/{c.shape[0]}"
            )
        return self.intercept + x @ b + (x * x) @ c


ThresholdSpec = Union[ConstantThreshold, PolynomialThreshold]


def evaluate_threshold(spec: ThresholdSpec, x: np.ndarray) -> float:
    """Evaluate the threshold at a single covariate vector."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(spec.values(x)[0])


def fit_threshold(x: np.ndarray, y: np.ndarray) -> PolynomialThreshold:
    """Least-squares degree-2 fit of the outcome on the covariates.

    Used to center the good/bad outcome split at the conditional mean.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = x.shape
    design = np.column_stack([np.ones(n), x, x * x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return PolynomialThreshold(float(coef[0]), coef[1 : d + 1].copy(), coef[d + 1 :].copy())


# ---------------------------------------------------------------------------
# Kernels and surrogate configuration
# ---------------------------------------------------------------------------

LINEAR = "linear"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth.

    ``gamma`` applies to the Gaussian kernel exp(-gamma**2 * ||x - x'||**2);
    leave it ``None`` to have fitters fill it in with the median heuristic.
    """

    kind: str = LINEAR
    gamma: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in (LINEAR, GAUSSIAN):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be positive and finite, got {self.gamma}")


@dataclass(frozen=True)
class SurrogateConfig:
    """Hyperparameters of the truncated-hinge surrogate fit.

    ``epsilon`` is in dose units; ``None`` means the fitter's default
    (dose range times n**(-1/3)). ``lam`` scales the squared-norm penalty.
    """

    alpha: float = 0.5
    epsilon: Optional[float] = None
    lam: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    max_dc_iters: int = 25
    descent_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.epsilon is not None and not (self.epsilon > 0):
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if not (self.lam > 0):
            raise ValidationError(f"lam must be positive, got {self.lam}")
        if self.max_dc_iters < 1:
            raise ValidationError("max_dc_iters must be a positive integer")
        if not (self.descent_tolerance > 0):
            raise ValidationError("descent_tolerance must be positive")

    def resolved_epsilon(self, dose_bounds: tuple[float, float], n: int) -> float:
        span = dose_bounds[1] - dose_bounds[0]
        eps = self.epsilon if self.epsilon is not None else span * n ** (-1.0 / 3.0)
        if not (0 < eps < span):
            raise ValidationError(f"epsilon must lie in (0, {span}), got {eps}")
        return float(eps)


# ---------------------------------------------------------------------------
# Fitted interval policies
# ---------------------------------------------------------------------------

LOWER = "lower"
UPPER = "upper"
TWO_SIDED = "two-sided"


@dataclass(frozen=True)
class KernelExpansion:
    """Bound function in representer form: sum_j coef_j k(x, X_j) + intercept."""

    kernel: KernelSpec
    coef: np.ndarray
    intercept: float
    train_x: np.ndarray

    def __post_init__(self) -> None:
        if self.coef.shape[0] != self.train_x.shape[0]:
            raise ValidationError(
                f"coefficient length {self.coef.shape[0]} != stored rows {self.train_x.shape[0]}"
            )
        if self.kernel.kind == GAUSSIAN and self.kernel.gamma is None:
            raise ValidationError("fitted Gaussian expansion requires an explicit gamma")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        from .kernels import gram  # local import avoids a module cycle

        k = gram(self.kernel, np.asarray(x, dtype=float), self.train_x)
        return k @ self.coef + self.intercept


@dataclass(frozen=True)
class IntervalPolicyModel:
    """Fitted dose-interval policy.

    ``side`` selects which bounds are active: "lower" recommends
    [f_L(x), a_U], "upper" recommends [a_L, f_U(x)], "two-sided" both.
    Predicted bounds are always clipped into ``dose_bounds``; for two-sided
    models the lower bound is additionally clipped to stay below the upper.
    """

    side: str
    alpha: float
    dose_bounds: tuple[float, float]
    threshold: ThresholdSpec
    lower: Optional[KernelExpansion] = None
    upper: Optional[KernelExpansion] = None

    def __post_init__(self) -> None:
        if self.side not in (LOWER, UPPER, TWO_SIDED):
            raise ValidationError(f"unknown side {self.side!r}")
        if self.side in (LOWER, TWO_SIDED) and self.lower is None:
            raise ValidationError(f"side={self.side!r} requires a lower expansion")
        if self.side in (UPPER, TWO_SIDED) and self.upper is None:
            raise ValidationError(f"side={self.side!r} requires an upper expansion")

    def predict_bounds(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interval endpoints for each covariate row, clipped and ordered."""
        x = np.asarray(x, dtype=float)
        a_lo, a_hi = self.dose_bounds
        if self.lower is not None:
            lo = np.clip(self.lower.evaluate(x), a_lo, a_hi)
        else:
            lo = np.full(x.shape[0], a_lo)
        if self.upper is not None:
            hi = np.clip(self.upper.evaluate(x), a_lo, a_hi)
        else:
            hi = np.full(x.shape[0], a_hi)
        if self.side == TWO_SIDED:
            lo = np.minimum(lo, hi)
        return lo, hi
