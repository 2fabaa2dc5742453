import math

import numpy as np
import pytest

from doseinterval import KernelSpec, ValidationError, gram, median_heuristic

LIN = KernelSpec("linear")


def test_gaussian_unit_diagonal():
    x = np.random.default_rng(0).normal(size=(10, 3))
    k = gram(KernelSpec("gaussian", 0.7), x)
    np.testing.assert_array_equal(np.diag(k), np.ones(10))


def test_gaussian_hand_value():
    spec = KernelSpec("gaussian", 1.0)
    k = gram(spec, np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
    assert k[0, 0] == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_linear_hand_value():
    k = gram(LIN, np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]))
    assert k[0, 0] == 11.0


def test_gram_exactly_symmetric():
    x = np.random.default_rng(1).normal(size=(31, 4))
    for spec in (LIN, KernelSpec("gaussian", 0.5)):
        k = gram(spec, x)
        assert np.array_equal(k, k.T)


def test_gram_positive_semidefinite():
    x = np.random.default_rng(2).normal(size=(40, 3))
    for spec in (LIN, KernelSpec("gaussian", 1.3)):
        k = gram(spec, x)
        eigs = np.linalg.eigvalsh(k)
        assert eigs.min() >= -1e-8 * x.shape[0]


def test_gram_permutation_equivariance():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(17, 3))
    p = rng.permutation(17)
    for spec in (LIN, KernelSpec("gaussian", 0.9)):
        k = gram(spec, x)
        kp = gram(spec, x[p])
        assert np.array_equal(kp, k[np.ix_(p, p)])


def test_gram_dimension_mismatch():
    with pytest.raises(ValidationError, match="column mismatch"):
        gram(LIN, np.zeros((3, 2)), np.zeros((3, 4)))


def test_gaussian_requires_gamma():
    with pytest.raises(ValidationError, match="gamma"):
        gram(KernelSpec("gaussian"), np.zeros((2, 2)))


def test_median_heuristic_single_pair():
    x = np.array([[0.0], [2.0]])  # squared distance 4
    assert median_heuristic(x) == pytest.approx(0.5)


def test_median_heuristic_three_collinear():
    x = np.array([[0.0], [1.0], [2.0]])  # squared distances {1, 4, 1}
    assert median_heuristic(x) == pytest.approx(1.0)


def test_median_heuristic_identical_points():
    with pytest.raises(ValidationError, match="identical"):
        median_heuristic(np.ones((5, 2)))


def test_median_heuristic_normalizes_median_distance():
    x = np.random.default_rng(4).normal(size=(30, 5))
    g = median_heuristic(x)
    from scipy.spatial.distance import pdist

    med = np.median(pdist(x, "sqeuclidean"))
    assert g**2 * med == pytest.approx(1.0)
