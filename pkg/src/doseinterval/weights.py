"""Generalized propensity scores for a continuous dose.

A Gaussian linear-mean model for the dose given covariates, truncated to the
dose range. Inverse-density weights are capped and normalized by default;
raw inverse weights are known to be unstable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .types import Dataset, ValidationError

SIGMA_FLOOR_FRACTION = 1e-3  # of the dose range
DEFAULT_CAP = 100.0


@dataclass(frozen=True)
class PropensityModel:
    """Truncated-normal dose model: A | x ~ N(mu(x), sigma^2) on the bounds.

    ``coef`` holds the intercept followed by one slope per covariate.
    """

    coef: np.ndarray
    sigma: float
    dose_bounds: tuple[float, float]
    cap: float = DEFAULT_CAP
    normalize: bool = True
    used_ridge: bool = False

    def __post_init__(self) -> None:
        if not (self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not (self.cap > 1):
            raise ValidationError(f"cap must exceed 1, got {self.cap}")

    def mean(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.coef[0] + x @ self.coef[1:]


def truncated_normal_density(a, mu, sigma, lo: float, hi: float):
    """Density of N(mu, sigma^2) truncated to [lo, hi], evaluated at a."""
    a = np.asarray(a, dtype=float)
    z = (a - mu) / sigma
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    mass = ndtr((hi - mu) / sigma) - ndtr((lo - mu) / sigma)
    return phi / (sigma * mass)


def fit_propensity(
    data: Dataset, cap: float = DEFAULT_CAP, normalize: bool = True
) -> PropensityModel:
    """Least-squares fit of the dose on the covariates.

    The residual standard deviation uses denominator n - d - 1 and is
    floored at a small fraction of the dose range so that exact linear
    assignments do not produce degenerate densities.
    """
    data = _require_valid(data)
    n, d = data.n, data.d
    if n <= d + 1:
        warnings.warn(
            f"propensity fit with n={n} <= d+1={d + 1}; taking the ridge path",
            RuntimeWarning,
            stacklevel=2,
        )
    design = np.column_stack([np.ones(n), data.x])
    coef, _, rank, _ = np.linalg.lstsq(design, data.a, rcond=None)
    used_ridge = False
    if rank < design.shape[1]:
        gram_ = design.T @ design + 1e-8 * np.eye(design.shape[1])
        coef = np.linalg.solve(gram_, design.T @ data.a)
        used_ridge = True
    resid = data.a - design @ coef
    dof = max(n - d - 1, 1)
    sigma = float(np.sqrt(resid @ resid / dof))
    lo, hi = data.dose_bounds
    sigma = max(sigma, SIGMA_FLOOR_FRACTION * (hi - lo))
    return PropensityModel(coef, sigma, data.dose_bounds, cap, normalize, used_ridge)


def density(model: PropensityModel, a: float, x: np.ndarray) -> float:
    """Conditional dose density at (a, x); errors outside the dose bounds."""
    lo, hi = model.dose_bounds
    if not (lo <= a <= hi):
        raise ValidationError(f"dose {a} outside bounds [{lo}, {hi}]")
    mu = float(model.mean(np.asarray(x, dtype=float).reshape(1, -1))[0])
    return float(truncated_normal_density(a, mu, model.sigma, lo, hi))


def densities(model: PropensityModel, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    lo, hi = model.dose_bounds
    a = np.asarray(a, dtype=float)
    if np.any((a < lo) | (a > hi)):
        bad = int(np.argmax((a < lo) | (a > hi)))
        raise ValidationError(f"dose out of bounds, row {bad}")
    return truncated_normal_density(a, model.mean(x), model.sigma, lo, hi)


def compute_weights(
    model: PropensityModel,
    data: Dataset,
    cap: float | None = None,
    normalize: bool | None = None,
) -> np.ndarray:
    """Capped inverse-density weights, optionally rescaled to mean one."""
    cap = model.cap if cap is None else cap
    normalize = model.normalize if normalize is None else normalize
    w = np.minimum(1.0 / densities(model, data.a, data.x), cap)
    if normalize:
        w = w / w.mean()
    return w


def _require_valid(data: Dataset) -> Dataset:
    from .types import validate_dataset

    return validate_dataset(data)
