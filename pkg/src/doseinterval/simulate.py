"""Synthetic dose-response benchmarks with analytic oracles.

Three data-generating processes over covariates X ~ Uniform(-1, 1)^d and
doses on [-2, 2]:

* ``s1``: linear dose assignment mean and a steep outcome sigmoid centered
  at that mean, so the level-0.5 lower bound is linear in x.
* ``s2``: nonlinear assignment mean, same sigmoid construction, nonlinear
  bound.
* ``plateau``: outcomes high on a dose plateau roughly [-0.5, 0.5] and low
  outside, giving a genuine two-sided target with crossings near +/-0.5.

Confounded doses follow a truncated normal around the assignment mean
(rejection sampled); unconfounded doses are Uniform(-2, 2). Outcomes are
Gaussian around the scenario mean, so the probability of exceeding any
threshold is available in closed form for oracle checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit, ndtr

from .types import Dataset, ValidationError, validate_dataset
from .weights import truncated_normal_density

DOSE_BOUNDS = (-2.0, 2.0)
SIGMOID_SCALE = 10.0
SIGMOID_HEIGHT = 5.0
PLATEAU_HALF_WIDTH = 0.5

S1 = "s1"
S2 = "s2"
PLATEAU = "plateau"
_SCENARIOS = (S1, S2, PLATEAU)


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one synthetic benchmark draw."""

    scenario: str
    n: int
    d: int
    sigma2: float = 2.25
    confounded: bool = True
    seed: int = 0
    dose_spread: float = 0.5
    # Reading of the dose-noise parameter: variance (default) or sd.
    dose_spread_is_variance: bool = True

    def __post_init__(self) -> None:
        if self.scenario not in _SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.d < 4:
            raise ValidationError("scenario formulas use the first four covariates; need d >= 4")
        if not (self.sigma2 > 0):
            raise ValidationError("sigma2 must be positive")
        if not (self.dose_spread > 0):
            raise ValidationError("dose_spread must be positive")

    @property
    def dose_sd(self) -> float:
        return math.sqrt(self.dose_spread) if self.dose_spread_is_variance else self.dose_spread

    @property
    def outcome_sd(self) -> float:
        return math.sqrt(self.sigma2)


def mu_dose(spec: ScenarioSpec, x: np.ndarray) -> np.ndarray:
    """Dose assignment mean; also the sigmoid center for s1/s2 outcomes."""
    x = np.asarray(x, dtype=float)
    if spec.scenario == S2:
        return (
            0.75 * np.log(np.abs(x[:, 0]) + 1.0)
            - 0.2 * np.cos(np.pi * x[:, 1])
            + 0.2 * (x[:, 2] > 0)
            - 0.4
        )
    return 0.3 * x[:, 0] + 0.3 * x[:, 1] + 0.3 * x[:, 2]


def outcome_shift(spec: ScenarioSpec, x: np.ndarray) -> np.ndarray:
    """Dose-independent prognostic part of the outcome mean."""
    x = np.asarray(x, dtype=float)
    if spec.scenario == S2:
        return 0.4 * np.sin(np.pi * x[:, 1]) + 0.4 * (x[:, 2] > 0) + 0.4 * np.abs(x[:, 3])
    return 0.6 * x[:, 1] + 0.6 * x[:, 2] + 0.6 * x[:, 3]


def mu_outcome(spec: ScenarioSpec, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Conditional outcome mean given dose and covariates."""
    a = np.asarray(a, dtype=float)
    if spec.scenario == PLATEAU:
        ramp = expit(SIGMOID_SCALE * (a + PLATEAU_HALF_WIDTH)) - expit(
            SIGMOID_SCALE * (a - PLATEAU_HALF_WIDTH)
        )
        return SIGMOID_HEIGHT * ramp + outcome_shift(spec, x)
    center = mu_dose(spec, x)
    return SIGMOID_HEIGHT * expit(SIGMOID_SCALE * (a - center)) + outcome_shift(spec, x)


def oracle_threshold(spec: ScenarioSpec, x: np.ndarray) -> np.ndarray:
    """Threshold placed at the sigmoid midpoint: half height plus the shift.

    With alpha = 0.5 the exact bound crossings sit where the outcome mean
    equals this value (the assignment mean for s1/s2, ~+/-0.5 for plateau).
    """
    return 0.5 * SIGMOID_HEIGHT + outcome_shift(spec, x)


def true_prob_above(spec: ScenarioSpec, a, x: np.ndarray, s) -> np.ndarray:
    """P(Y(a) > s | x) under the Gaussian outcome model."""
    return ndtr((mu_outcome(spec, np.asarray(a, dtype=float), x) - s) / spec.outcome_sd)


def true_inverse_density(spec: ScenarioSpec, a, x: np.ndarray) -> np.ndarray:
    """Reciprocal of the data-generating dose density (the oracle weights)."""
    lo, hi = DOSE_BOUNDS
    a = np.asarray(a, dtype=float)
    if np.any((a < lo) | (a > hi)):
        raise ValidationError("dose outside the generating support")
    if not spec.confounded:
        return np.full(a.shape, hi - lo)
    dens = truncated_normal_density(a, mu_dose(spec, x), spec.dose_sd, lo, hi)
    return 1.0 / dens


def _sample_truncated_normal(
    rng: np.random.Generator, mean: np.ndarray, sd: float, lo: float, hi: float
) -> np.ndarray:
    """Rejection sampling; redraws only the out-of-range entries."""
    a = rng.normal(mean, sd)
    bad = (a < lo) | (a > hi)
    while bad.any():
        a[bad] = rng.normal(mean[bad], sd)
        bad = (a < lo) | (a > hi)
    return a


def generate(spec: ScenarioSpec) -> Dataset:
    """Draw one dataset; bit-identical for equal specs."""
    rng = np.random.default_rng(spec.seed)
    lo, hi = DOSE_BOUNDS
    x = rng.uniform(-1.0, 1.0, size=(spec.n, spec.d))
    if spec.confounded:
        a = _sample_truncated_normal(rng, mu_dose(spec, x), spec.dose_sd, lo, hi)
    else:
        a = rng.uniform(lo, hi, size=spec.n)
    y = rng.normal(mu_outcome(spec, a, x), spec.outcome_sd)
    return validate_dataset(Dataset(x, a, y, None, DOSE_BOUNDS))


# ---------------------------------------------------------------------------
# Sidecar serialization (lets file-based workflows reach the oracles)
# ---------------------------------------------------------------------------

def spec_to_json(spec: ScenarioSpec) -> str:
    payload = {"format_version": 1, "kind": "scenario"}
    payload.update(asdict(spec))
    return json.dumps(payload, indent=2)


def spec_from_json(text: str) -> ScenarioSpec:
    payload = json.loads(text)
    if payload.get("kind") != "scenario":
        raise ValidationError("not a scenario sidecar file")
    payload.pop("format_version", None)
    payload.pop("kind", None)
    return ScenarioSpec(**payload)
