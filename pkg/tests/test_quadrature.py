import numpy as np
import pytest

from infogeo_sensor.errors import DomainError, NonFiniteFieldError, PositiveDefinitenessError
from infogeo_sensor.quadrature import (
    MONTE_CARLO,
    Prior,
    QuadratureRule,
    build_grid,
    integrate_matrix,
    integrate_scalar,
    weighted_sum,
)


def _standard(order=9):
    return build_grid(Prior(mean=(0.0, 0.0), covariance=np.eye(2), rule=QuadratureRule(order=order)))


def test_weights_positive_and_normalized():
    grid = _standard()
    assert len(grid) == 81
    assert np.all(grid.weights > 0)
    assert grid.weights.sum() == pytest.approx(1.0, rel=1e-14)


def test_point_mass_grid():
    grid = build_grid(Prior(mean=(1.0, 2.0), covariance=0.01 * np.eye(2), rule=QuadratureRule(order=1)))
    assert len(grid) == 1
    np.testing.assert_allclose(grid.nodes[0], [1.0, 2.0])
    assert grid.weights[0] == pytest.approx(1.0)


@pytest.mark.parametrize(("power", "moment"), [(2, 1.0), (4, 3.0), (6, 15.0), (8, 105.0), (16, 2027025.0)])
def test_gauss_hermite_exact_moments(power, moment):
    grid = _standard(order=9)
    assert integrate_scalar(lambda theta: theta[0] ** power, grid) == pytest.approx(moment, rel=1e-10)
    assert integrate_scalar(lambda theta: theta[1] ** power, grid) == pytest.approx(moment, rel=1e-10)


def test_gauss_hermite_mixed_moment():
    grid = _standard(order=9)
    assert integrate_scalar(lambda t: t[0] ** 2 * t[1] ** 2, grid) == pytest.approx(1.0, rel=1e-12)
    assert integrate_scalar(lambda t: t[0] ** 3 * t[1], grid) == pytest.approx(0.0, abs=1e-12)


def test_grid_reproduces_prior_mean_and_covariance():
    mean = np.array([1.0, -0.5])
    cov = np.array([[0.04, 0.01], [0.01, 0.02]])
    grid = build_grid(Prior(mean=mean, covariance=cov))
    np.testing.assert_allclose(weighted_sum(grid.nodes, grid), mean, rtol=1e-12)
    second = integrate_matrix(lambda theta: np.outer(theta - mean, theta - mean), grid)
    np.testing.assert_allclose(np.asarray(second), cov, rtol=1e-12)


def test_integrate_matrix_returns_symmetric():
    grid = _standard(order=3)
    out = integrate_matrix(lambda theta: np.array([[1.0, theta[0]], [0.0, 2.0]]), grid)
    np.testing.assert_array_equal(np.asarray(out), np.asarray(out).T)


def test_monte_carlo_rule_is_seeded():
    rule = QuadratureRule(kind=MONTE_CARLO, samples=2000, seed=5)
    prior = Prior(mean=(1.0, 1.0), covariance=0.01 * np.eye(2), rule=rule)
    a, b = build_grid(prior), build_grid(prior)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    np.testing.assert_allclose(a.weights, 1.0 / 2000)
    np.testing.assert_allclose(weighted_sum(a.nodes, a), [1.0, 1.0], atol=5 * 0.1 / np.sqrt(2000))


def test_non_finite_value_names_the_node():
    grid = _standard(order=3)
    values = np.ones(len(grid))
    values[4] = np.nan
    with pytest.raises(NonFiniteFieldError) as info:
        weighted_sum(values, grid)
    assert info.value.node == 4
    np.testing.assert_array_equal(info.value.point, grid.nodes[4])


def test_rule_validation():
    with pytest.raises(DomainError):
        QuadratureRule(kind="simpson")
    with pytest.raises(DomainError):
        QuadratureRule(order=0)
    with pytest.raises(DomainError):
        QuadratureRule(samples=0)


def test_prior_validation():
    with pytest.raises(PositiveDefinitenessError):
        Prior(mean=(0.0, 0.0), covariance=[[0.01, 0.02], [0.02, 0.01]])
    with pytest.raises(DomainError):
        Prior(mean=(0.0, 0.0), covariance=np.eye(3))
