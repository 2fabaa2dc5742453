"""Indirect interval benchmark: outcome classification plus dose grid search.

Fits an L1-penalized logistic model for the good-outcome label on a quadratic
feature expansion of (dose, covariates), then scans a 200-point dose grid for
the region where the predicted probability clears the confidence level. The
classifier is solved by proximal gradient descent with backtracking (FISTA
acceleration with restarts), deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .types import Dataset, ThresholdSpec, ValidationError, validate_dataset

GRID_POINTS = 200
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 50_000


@dataclass(frozen=True)
class IndirectModel:
    """L1-logistic classifier over [a, a^2, x_j, x_j^2, a*x_j] features.

    Features are standardized with the stored training statistics;
    constant columns are dropped (``kept`` indexes the survivors).
    """

    coef: np.ndarray
    intercept: float
    feature_mean: np.ndarray
    feature_sd: np.ndarray
    kept: np.ndarray
    dose_bounds: tuple[float, float]
    alpha: float
    l1_penalty: float
    n_iters: int
    grad_norm: float

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.dose_bounds[0], self.dose_bounds[1], GRID_POINTS)


def _expand(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 1)
    x = np.asarray(x, dtype=float)
    return np.column_stack([a, a**2, x, x**2, a * x])


def fit_indirect(
    data: Dataset,
    threshold: ThresholdSpec,
    alpha: float = 0.5,
    l1_penalty: float = 1e-3,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> IndirectModel:
    """Fit the good-outcome classifier; the intercept is unpenalized.

    Minimizes mean logistic loss plus ``l1_penalty * ||coef||_1`` to a
    gradient-mapping tolerance. Errors when only one label class exists.
    """
    data = validate_dataset(data)
    labels = (data.y > threshold.values(data.x)).astype(float)
    if labels.min() == labels.max():
        raise ValidationError("single-class data: cannot fit the outcome classifier")
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    if l1_penalty < 0:
        raise ValidationError("l1_penalty must be nonnegative")

    raw = _expand(data.a, data.x)
    mean = raw.mean(axis=0)
    sd = raw.std(axis=0)
    kept = np.flatnonzero(sd > 0)
    feats = (raw[:, kept] - mean[kept]) / sd[kept]
    n, p = feats.shape

    def loss_grad(w: np.ndarray, b: float) -> tuple[float, np.ndarray, float]:
        margin = feats @ w + b
        # mean logistic loss: log(1 + e^m) - t*m, computed stably
        loss = float(np.mean(np.logaddexp(0.0, margin) - labels * margin))
        resid = expit(margin) - labels
        return loss, feats.T @ resid / n, float(resid.mean())

    def prox(w: np.ndarray, step: float) -> np.ndarray:
        return np.sign(w) * np.maximum(np.abs(w) - step * l1_penalty, 0.0)

    w = np.zeros(p)
    b = 0.0
    zw, zb = w, b  # FISTA extrapolation point
    t_accel = 1.0
    step = 1.0
    obj_prev = np.inf
    grad_norm = np.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        loss_z, grad_w, grad_b = loss_grad(zw, zb)
        while True:
            w_new = prox(zw - step * grad_w, step)
            b_new = zb - step * grad_b
            dw = w_new - zw
            db = b_new - zb
            quad = loss_z + grad_w @ dw + grad_b * db + (dw @ dw + db * db) / (2 * step)
            loss_new, _, _ = loss_grad(w_new, b_new)
            if loss_new <= quad + 1e-12:
                break
            step *= 0.5
        obj_new = loss_new + l1_penalty * np.abs(w_new).sum()
        if obj_new > obj_prev:  # restart the acceleration when it overshoots
            zw, zb, t_accel = w, b, 1.0
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_accel**2))
        momentum = (t_accel - 1.0) / t_next
        zw = w_new + momentum * (w_new - w)
        zb = b_new + momentum * (b_new - b)
        grad_norm = _gradient_mapping_norm(w_new, b_new, loss_grad, prox, step)
        w, b, t_accel, obj_prev = w_new, b_new, t_next, obj_new
        if grad_norm <= tol:
            break

    return IndirectModel(
        coef=w,
        intercept=float(b),
        feature_mean=mean,
        feature_sd=sd,
        kept=kept,
        dose_bounds=data.dose_bounds,
        alpha=float(alpha),
        l1_penalty=float(l1_penalty),
        n_iters=iterations,
        grad_norm=float(grad_norm),
    )


def _gradient_mapping_norm(w, b, loss_grad, prox, step) -> float:
    _, grad_w, grad_b = loss_grad(w, b)
    w_step = prox(w - step * grad_w, step)
    b_step = b - step * grad_b
    return float(
        np.sqrt(((w - w_step) ** 2).sum() + (b - b_step) ** 2) / step
    )


def predict_prob(model: IndirectModel, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Predicted probability of a good outcome at (dose, covariates) pairs."""
    raw = _expand(a, x)
    feats = (raw[:, model.kept] - model.feature_mean[model.kept]) / model.feature_sd[model.kept]
    return expit(feats @ model.coef + model.intercept)


def extract_lower_bound(
    model: IndirectModel, x: np.ndarray, grid_hi: float | None = None
) -> np.ndarray:
    """Lower interval bound per covariate row from the grid scan.

    Returns the smallest grid dose from which every larger grid dose has
    predicted probability above the confidence level (the start of the
    maximal valid suffix); rows with no valid suffix get the top of the
    grid. ``grid_hi`` shrinks the scan range, which exposes how degenerate
    recommendations track the search range.
    """
    x = np.asarray(x, dtype=float)
    lo = model.dose_bounds[0]
    hi = model.dose_bounds[1] if grid_hi is None else float(grid_hi)
    if not lo < hi:
        raise ValidationError("empty grid range")
    grid = np.linspace(lo, hi, GRID_POINTS)
    m = x.shape[0]
    a_rep = np.tile(grid, m)
    x_rep = np.repeat(x, GRID_POINTS, axis=0)
    probs = predict_prob(model, a_rep, x_rep).reshape(m, GRID_POINTS)
    valid = probs > model.alpha
    suffix_ok = np.flip(np.logical_and.accumulate(np.flip(valid, axis=1), axis=1), axis=1)
    first = np.where(suffix_ok.any(axis=1), suffix_ok.argmax(axis=1), GRID_POINTS - 1)
    return grid[first]
