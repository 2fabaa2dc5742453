import math

import numpy as np
import pytest
from scipy.integrate import quad

from doseinterval import (
    Dataset,
    PropensityModel,
    ValidationError,
    compute_weights,
    density,
    fit_propensity,
    validate_dataset,
)
from doseinterval.weights import densities


def phi_oracle(z):
    # independent normal CDF via the error function
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def make_data(rng, n=400, d=3, slope=None, noise=0.3):
    x = rng.uniform(-1, 1, size=(n, d))
    slope = np.zeros(d) if slope is None else slope
    a = np.clip(x @ slope + rng.normal(0, noise, n), -1.99, 1.99)
    y = rng.normal(size=n)
    return validate_dataset(Dataset(x, a, y, None, (-2.0, 2.0)))


def test_density_hand_value():
    model = PropensityModel(np.array([0.0, 0.0]), 0.5, (-2.0, 2.0))
    value = density(model, 0.0, np.array([0.0]))
    expected = (1.0 / math.sqrt(2 * math.pi)) / 0.5 / (phi_oracle(4.0) - phi_oracle(-4.0))
    assert value == pytest.approx(expected, rel=1e-9)
    assert value == pytest.approx(0.797935, abs=5e-7)


def test_density_symmetry_about_mean():
    model = PropensityModel(np.array([0.0, 0.0]), 0.8, (-2.0, 2.0))
    x = np.array([0.0])
    for a in (0.3, 0.9, 1.5):
        assert density(model, a, x) == pytest.approx(density(model, -a, x), rel=1e-12)


def test_density_rejects_out_of_support():
    model = PropensityModel(np.array([0.0, 0.0]), 0.5, (-2.0, 2.0))
    with pytest.raises(ValidationError, match="outside bounds"):
        density(model, 2.5, np.array([0.0]))


def test_density_integrates_to_one():
    model = PropensityModel(np.array([0.4, -0.2]), 0.6, (-2.0, 2.0))
    x = np.array([0.5])
    total, err = quad(lambda a: density(model, a, x), -2.0, 2.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_fit_recovers_linear_assignment():
    rng = np.random.default_rng(0)
    data = make_data(rng, n=3000, slope=np.array([0.5, 0.0, 0.0]), noise=0.25)
    model = fit_propensity(data)
    assert model.coef[1] == pytest.approx(0.5, abs=0.03)
    assert model.sigma == pytest.approx(0.25, abs=0.02)


def test_exact_linear_dose_hits_sigma_floor():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, size=(100, 2))
    a = 0.5 * x[:, 0]
    data = validate_dataset(Dataset(x, a, rng.normal(size=100), None, (-2.0, 2.0)))
    model = fit_propensity(data)
    assert model.coef[1] == pytest.approx(0.5, abs=1e-8)
    assert model.sigma == pytest.approx(1e-3 * 4.0)  # floor kicks in


def test_underdetermined_design_takes_ridge_path():
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, size=(5, 8))
    data = validate_dataset(
        Dataset(x, rng.uniform(-1, 1, 5), rng.normal(size=5), None, (-2.0, 2.0))
    )
    with pytest.warns(RuntimeWarning, match="ridge"):
        model = fit_propensity(data)
    assert model.used_ridge


def test_independent_dose_matches_marginal_density():
    # doses ignore x: fitted slopes vanish and weights track the marginal
    rng = np.random.default_rng(3)
    n = 5000
    x = rng.uniform(-1, 1, size=(n, 2))
    a = np.clip(rng.normal(0.1, 0.4, n), -1.999, 1.999)
    data = validate_dataset(Dataset(x, a, rng.normal(size=n), None, (-2.0, 2.0)))
    model = fit_propensity(data)
    assert np.all(np.abs(model.coef[1:]) < 0.05)
    w = compute_weights(model, data, normalize=False)
    from doseinterval.weights import truncated_normal_density

    oracle = 1.0 / truncated_normal_density(a, 0.1, 0.4, -2.0, 2.0)
    ratio = w / oracle
    assert np.median(np.abs(ratio - 1.0)) < 0.10


def test_weights_capped_and_positive():
    model = PropensityModel(np.array([0.0, 0.0]), 0.05, (-2.0, 2.0), cap=5.0)
    rng = np.random.default_rng(4)
    n = 50
    data = validate_dataset(
        Dataset(np.zeros((n, 1)), rng.uniform(-1.9, 1.9, n), rng.normal(size=n), None, (-2, 2))
    )
    w = compute_weights(model, data, normalize=False)
    assert np.all(w > 0) and np.all(w <= 5.0)
    assert w.max() == 5.0  # narrow density: cap is active in the tails


def test_cap_inactive_when_density_large_enough():
    model = PropensityModel(np.array([0.0, 0.0]), 1.0, (-2.0, 2.0), cap=100.0)
    data = validate_dataset(
        Dataset(np.zeros((3, 1)), np.array([-1.0, 0.0, 1.0]), np.zeros(3), None, (-2, 2))
    )
    w = compute_weights(model, data, normalize=False)
    assert np.all(w < 100.0)


def test_reciprocal_hand_case():
    w = np.minimum(1.0 / 0.25, 100.0)
    assert w == 4.0  # density 0.25 with a slack cap maps to weight 4


def test_constant_density_normalizes_to_ones():
    rng = np.random.default_rng(5)
    n = 20
    # one covariate row repeated: the model density only varies through a,
    # so equal doses give equal weights
    data = validate_dataset(
        Dataset(np.zeros((n, 1)), np.full(n, 0.3), rng.normal(size=n), None, (-2, 2))
    )
    model = PropensityModel(np.array([0.0, 0.0]), 0.7, (-2.0, 2.0))
    w = compute_weights(model, data, normalize=True)
    np.testing.assert_allclose(w, np.ones(n), rtol=1e-12)


def test_vectorized_densities_match_scalar():
    model = PropensityModel(np.array([0.1, 0.3]), 0.6, (-2.0, 2.0))
    rng = np.random.default_rng(6)
    x = rng.uniform(-1, 1, size=(10, 1))
    a = rng.uniform(-1.5, 1.5, 10)
    vec = densities(model, a, x)
    for i in range(10):
        assert vec[i] == pytest.approx(density(model, a[i], x[i]), rel=1e-12)
