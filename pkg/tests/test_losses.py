import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doseinterval import (
    Dataset,
    KernelSpec,
    SurrogateConfig,
    ValidationError,
    primal_objective,
    psi_eps,
    psi_eps_parts,
    psi_in,
    psi_out,
    validate_dataset,
)

finite = st.floats(-50, 50, allow_nan=False)
widths = st.floats(1e-3, 10, allow_nan=False)


@pytest.mark.parametrize(
    "a,b,eps,expected",
    [(1.0, 1.0, 0.1, 0.0), (1.05, 1.0, 0.1, 0.5), (2.0, 1.0, 0.1, 1.0)],
)
def test_psi_eps_spot_values(a, b, eps, expected):
    assert psi_eps(a, b, eps) == pytest.approx(expected)


@pytest.mark.parametrize(
    "a,b,eps,expected",
    [(2.0, 1.0, 0.1, (10.0, 9.0)), (1.0, 1.0, 0.1, (0.0, 0.0)), (1.05, 1.0, 0.1, (0.5, 0.0))],
)
def test_psi_parts_spot_values(a, b, eps, expected):
    p1, p2 = psi_eps_parts(a, b, eps)
    assert p1 == pytest.approx(expected[0]) and p2 == pytest.approx(expected[1])


@pytest.mark.parametrize(
    "b,expected", [(0.5, 1.0), (-0.2, 0.0), (0.05, 0.5), (1.2, 0.0), (0.97, 0.3)]
)
def test_psi_in_piecewise_cases(b, expected):
    assert psi_in(0.0, b, 1.0, 0.1) == pytest.approx(expected)


def test_decomposition_identity_bulk():
    rng = np.random.default_rng(0)
    a = rng.uniform(-10, 10, 10_000)
    b = rng.uniform(-10, 10, 10_000)
    eps = rng.uniform(1e-3, 5.0, 10_000)
    p1, p2 = psi_eps_parts(a, b, eps)
    gap = np.abs(psi_eps(a, b, eps) - (p1 - p2))
    assert gap.max() <= 1e-12


def test_complement_identity_bulk():
    rng = np.random.default_rng(1)
    a = rng.uniform(-10, 10, 10_000)
    c = a + rng.uniform(0, 10, 10_000)
    b = rng.uniform(-12, 12, 10_000)
    eps = rng.uniform(1e-3, 5.0, 10_000)
    total = psi_in(a, b, c, eps) + psi_out(a, b, c, eps)
    assert np.abs(total - 1.0).max() <= 1e-12


@given(finite, finite, widths)
@settings(max_examples=300, deadline=None)
def test_psi_decomposition_property(a, b, eps):
    p1, p2 = psi_eps_parts(a, b, eps)
    assert p1 >= 0 and p2 >= 0
    assert abs(psi_eps(a, b, eps) - (p1 - p2)) <= 1e-12


@given(finite, finite, finite, widths)
@settings(max_examples=300, deadline=None)
def test_psi_in_range_and_complement(a, b, width, eps):
    c = a + abs(width)
    v = psi_in(a, b, c, eps)
    assert 0.0 <= v <= 1.0
    assert psi_out(a, b, c, eps) == pytest.approx(1.0 - v)


@given(finite, finite, st.floats(-1, 1), widths)
@settings(max_examples=300, deadline=None)
def test_psi_eps_lipschitz_in_b(a, b, delta, eps):
    lhs = abs(psi_eps(a, b + delta, eps) - psi_eps(a, b, eps))
    assert lhs <= abs(delta) / eps + 1e-9


@given(finite, finite, st.floats(0, 5), widths)
@settings(max_examples=300, deadline=None)
def test_psi_eps_monotone(a, b, bump, eps):
    assert psi_eps(a + bump, b, eps) >= psi_eps(a, b, eps) - 1e-12
    assert psi_eps(a, b + bump, eps) <= psi_eps(a, b, eps) + 1e-12


def test_psi_rejects_bad_eps():
    with pytest.raises(ValidationError):
        psi_eps(1.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        psi_in(0.0, 0.5, 1.0, -1.0)


# ---------------------------------------------------------------------------
# primal objective
# ---------------------------------------------------------------------------

def one_row_dataset(a_value, y_value, weight):
    return validate_dataset(
        Dataset(
            np.array([[0.3]]),
            np.array([a_value]),
            np.array([y_value]),
            np.array([weight]),
            (-2.0, 2.0),
        )
    )


def config(eps, lam=1.0):
    return SurrogateConfig(alpha=0.5, epsilon=eps, lam=lam, kernel=KernelSpec("linear"))


def test_objective_zero_when_bound_clears_good_dose():
    # bound sits at a_L, dose is a good outcome well above it: no loss, no penalty
    data = one_row_dataset(a_value=0.0, y_value=10.0, weight=1.0)
    terms = primal_objective(data, np.zeros(1), -2.0, config(0.1), np.array([0.0]))
    assert terms.objective == 0.0


def test_objective_saturated_false_negative():
    # bound at a_U, good outcome at a dose more than eps below: full weighted loss
    data = one_row_dataset(a_value=0.0, y_value=10.0, weight=2.0)
    terms = primal_objective(data, np.zeros(1), 2.0, config(0.1), np.array([0.0]))
    assert terms.loss == pytest.approx(1.0)
    assert terms.regularization == 0.0


def test_objective_matches_per_row_recomputation():
    rng = np.random.default_rng(5)
    n = 60
    data = validate_dataset(
        Dataset(
            rng.uniform(-1, 1, (n, 3)),
            rng.uniform(-2, 2, n),
            rng.normal(size=n),
            rng.uniform(0.5, 2.0, n),
            (-2.0, 2.0),
        )
    )
    cfg = config(0.25, lam=0.7)
    coef = rng.normal(size=n) * 0.1
    intercept = 0.2
    s = rng.normal(size=n) * 0.5
    terms = primal_objective(data, coef, intercept, cfg, s)

    # independent summation oracle built directly from psi_eps, row by row
    from doseinterval import gram

    k = gram(cfg.kernel, data.x)
    f = k @ coef + intercept
    total = 0.0
    for i in range(n):
        if data.y[i] <= s[i]:
            total += data.weights[i] * 0.5 * psi_eps(data.a[i], f[i], 0.25)
        else:
            total += data.weights[i] * 0.5 * psi_eps(f[i], data.a[i], 0.25)
    assert terms.loss == pytest.approx(total, rel=1e-12)
    assert terms.regularization == pytest.approx(0.5 * 0.7 * coef @ k @ coef, rel=1e-12)
    assert terms.objective == pytest.approx(terms.loss + terms.regularization, rel=1e-12)
    assert np.all(terms.contributions >= 0)


def test_objective_requires_weights():
    data = validate_dataset(
        Dataset(np.array([[0.0]]), np.array([0.0]), np.array([1.0]), None, (-2, 2))
    )
    with pytest.raises(ValidationError, match="weights"):
        primal_objective(data, np.zeros(1), 0.0, config(0.1), np.array([0.0]))
