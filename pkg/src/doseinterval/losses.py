"""Truncated-hinge surrogate losses and the regularized primal objective.

The one-sided surrogate is psi_eps(a, b) = min((a - b)_+ / eps, 1), a bounded
ramp that replaces the interval-membership indicator. It splits into a
difference of two convex hinges (psi1 - psi2), which is what the
difference-of-convex fitter linearizes. The two-sided membership surrogate
psi_in ramps up over [a, a + eps], is flat at one inside, and ramps down over
[c - eps, c]; psi_out = 1 - psi_in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import Dataset, SurrogateConfig, ValidationError
from .kernels import gram


def _check_eps(eps) -> None:
    if not np.all(np.asarray(eps) > 0):
        raise ValidationError(f"eps must be positive, got {eps}")


def psi_eps(a, b, eps):
    """Bounded hinge min((a - b)_+ / eps, 1); value in [0, 1]."""
    _check_eps(eps)
    z = (np.asarray(a, dtype=float) - b) / eps
    return np.clip(z, 0.0, 1.0)


def psi_eps_parts(a, b, eps):
    """Convex split (psi1, psi2) with psi1 - psi2 = psi_eps(a, b, eps).

    psi1 = ((a - b)/eps)_+ and psi2 = ((a - b)/eps - 1)_+; both are
    nonnegative convex hinges in (a - b).
    """
    _check_eps(eps)
    z = (np.asarray(a, dtype=float) - b) / eps
    return np.maximum(z, 0.0), np.maximum(z - 1.0, 0.0)


def psi_in(a, b, c, eps):
    """Two-sided membership ramp for dose b against interval [a, c].

    Equals 0 outside the interval, 1 in its interior more than eps away
    from both ends, with linear ramps of width eps at the ends. Computed
    as min((b-a)/eps, (c-b)/eps, 1) clipped at 0; the form agrees with the
    left-closed piecewise branches everywhere, including overlapping ramps
    when c - a < 2*eps.
    """
    _check_eps(eps)
    b = np.asarray(b, dtype=float)
    up = (b - a) / eps
    down = (c - b) / eps
    return np.clip(np.minimum(up, down), 0.0, 1.0)


def psi_out(a, b, c, eps):
    """Complement of psi_in: one minus the membership ramp."""
    return 1.0 - psi_in(a, b, c, eps)


@dataclass(frozen=True)
class LossTerms:
    """Weighted per-observation surrogate losses plus the penalty."""

    contributions: np.ndarray
    loss: float
    regularization: float
    objective: float


def weighted_losses(
    f: np.ndarray,
    a: np.ndarray,
    above: np.ndarray,
    weights: np.ndarray,
    alpha: float,
    eps: float,
    side: str = "lower",
) -> np.ndarray:
    """Per-row weighted surrogate loss for a bound evaluated at f.

    ``above`` flags outcomes above the threshold. For a lower bound the
    false-positive ramp fires when the dose exceeds the bound and the
    false-negative ramp when the bound exceeds the dose; for an upper
    bound the roles mirror.
    """
    if side == "lower":
        fp = psi_eps(a, f, eps)
        fn = psi_eps(f, a, eps)
    elif side == "upper":
        fp = psi_eps(f, a, eps)
        fn = psi_eps(a, f, eps)
    else:
        raise ValidationError(f"side must be 'lower' or 'upper', got {side!r}")
    below = ~above
    return weights * (alpha * below * fp + (1.0 - alpha) * above * fn)


def primal_objective(
    data: Dataset,
    coef: np.ndarray,
    intercept: float,
    config: SurrogateConfig,
    threshold_values: np.ndarray,
    side: str = "lower",
) -> LossTerms:
    """Regularized empirical surrogate risk at a kernel expansion.

    The penalty is (lam/2) * coef' K coef; the intercept is unpenalized.
    Requires weights on the dataset.
    """
    if data.weights is None:
        raise ValidationError("primal objective requires weights on the dataset")
    coef = np.asarray(coef, dtype=float).reshape(-1)
    if coef.shape[0] != data.n:
        raise ValidationError(f"coefficient length {coef.shape[0]} != n={data.n}")
    eps = config.resolved_epsilon(data.dose_bounds, data.n)
    k = gram(config.kernel, data.x)
    f = k @ coef + intercept
    above = data.y > np.asarray(threshold_values, dtype=float).reshape(-1)
    contributions = weighted_losses(f, data.a, above, data.weights, config.alpha, eps, side)
    loss = float(contributions.sum())
    reg = 0.5 * config.lam * float(coef @ (k @ coef))
    return LossTerms(contributions, loss, reg, loss + reg)
