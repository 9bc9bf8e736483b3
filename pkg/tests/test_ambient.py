import math

import numpy as np
import pytest

from infogeo_sensor.ambient import (
    Divergence,
    MatrixField,
    MetricField,
    TangentField,
    ambient_energy_density,
    ambient_geodesic,
    ambient_geodesic_acceleration,
    ambient_geodesic_point,
    ambient_geodesic_velocity,
    ambient_inner,
    divergence_hessian,
    divergence_slope,
    integrate_ambient_geodesic,
    kl_divergence,
    mi_divergence,
)
from infogeo_sensor.checks import divergence_check, random_field_pair
from infogeo_sensor import spd
from infogeo_sensor.errors import DomainError, GeometryError, PositiveDefinitenessError, StepTooLargeError
from infogeo_sensor.quadrature import Prior, QuadratureRule, build_grid
from infogeo_sensor.sensor_model import SensorConfiguration, VonMisesModel


@pytest.fixture
def grid():
    return build_grid(Prior(mean=(0.0, 0.0), covariance=np.eye(2), rule=QuadratureRule(order=3)))


def _spd_pair(rng, m=3):
    a = rng.normal(size=(m, m))
    b = rng.normal(size=(m, m))
    return a @ a.T + np.eye(m), 0.5 * (b + b.T)


def test_constant_field_inner_product(grid):
    g = MetricField.constant(np.eye(2))
    h = TangentField.constant(np.eye(2))
    assert ambient_inner(g, h, h, grid) == pytest.approx(2.0)
    g2 = MetricField.constant(2.0 * np.eye(2))
    assert ambient_inner(g2, h, h, grid) == pytest.approx(0.5)


def test_volume_weighting(grid):
    g = MetricField.constant(3.0 * np.eye(2))
    h = TangentField.constant([[1.0, 0.5], [0.5, 2.0]])
    prior_weighted = ambient_inner(g, h, h, grid)
    assert ambient_inner(g, h, h, grid, weighting="volume") == pytest.approx(3.0 * prior_weighted)
    with pytest.raises(DomainError):
        ambient_inner(g, h, h, grid, weighting="jeffreys")


def test_inner_product_symmetric_in_directions(grid):
    rng = np.random.default_rng(3)
    g, h = random_field_pair(rng)
    _, k = random_field_pair(rng)
    assert ambient_inner(g, h, k, grid) == pytest.approx(ambient_inner(g, k, h, grid), rel=1e-12)
    assert ambient_inner(g, h, h, grid) > 0


def test_orthogonal_diagonal_directions(grid):
    g = MetricField.constant(np.eye(2))
    h = TangentField.constant(np.diag([1.0, 0.0]))
    k = TangentField.constant(np.diag([0.0, 1.0]))
    assert ambient_inner(g, h, k, grid) == 0.0


def test_inner_product_rejects_non_spd_metric(grid):
    g = MetricField.constant([[1.0, 2.0], [2.0, 1.0]])
    h = TangentField.constant(np.eye(2))
    with pytest.raises(PositiveDefinitenessError):
        ambient_inner(g, h, h, grid)


def test_unbatched_field_matches_batched(grid):
    sigma = SensorConfiguration.from_positions([[3.0, 1.0], [1.0, 3.0]])
    g = MetricField.from_sensors(sigma, VonMisesModel(2.0))
    slow = MatrixField(g, descriptor="pointwise")
    np.testing.assert_allclose(slow.at_nodes(grid), g.at_nodes(grid), rtol=1e-14)


def test_geodesic_endpoints():
    rng = np.random.default_rng(0)
    g0, gd0 = _spd_pair(rng)
    np.testing.assert_allclose(ambient_geodesic_point(g0, gd0, 0.0), g0, rtol=1e-14)
    np.testing.assert_allclose(ambient_geodesic_point(g0, np.zeros((3, 3)), 2.5), g0, rtol=1e-14)
    np.testing.assert_allclose(ambient_geodesic_velocity(g0, gd0, 0.0), gd0, atol=1e-12)


def test_geodesic_field_is_pointwise(grid):
    g0 = MetricField.constant(np.diag([1.0, 2.0]))
    gd0 = TangentField.constant(np.diag([1.0, -1.0]))
    gamma = ambient_geodesic(g0, gd0, 1.0)
    np.testing.assert_allclose(gamma((0.0, 0.0)), np.diag([math.e, 2.0 * math.exp(-0.5)]), rtol=1e-12)


def test_geodesic_energy_density_is_conserved():
    rng = np.random.default_rng(13)
    for _ in range(20):
        g0, gd0 = _spd_pair(rng)
        gd0 = 0.5 * gd0
        initial = ambient_energy_density(g0, gd0)
        for t in np.linspace(0.0, 1.0, 11):
            density = ambient_energy_density(
                ambient_geodesic_point(g0, gd0, t), ambient_geodesic_velocity(g0, gd0, t)
            )
            assert density == pytest.approx(initial, rel=1e-10)


def test_diagonal_geodesic_keeps_determinant():
    for t in (0.0, 0.5, 1.0):
        gamma = ambient_geodesic_point(np.eye(2), np.diag([1.0, -1.0]), t)
        np.testing.assert_allclose(gamma, np.diag([math.exp(t), math.exp(-t)]), rtol=1e-13, atol=1e-15)
        assert np.linalg.det(gamma) == pytest.approx(1.0, rel=1e-13)


def test_geodesic_rejects_asymmetric_product(monkeypatch):
    shear = np.array([[1.0, 1e-3], [0.0, 1.0]])
    monkeypatch.setattr(spd, "mat_exp", lambda a: shear)
    with pytest.raises(GeometryError, match="lost symmetry"):
        ambient_geodesic_point(np.eye(2), np.eye(2), 1.0)


def test_closed_form_satisfies_geodesic_equation():
    rng = np.random.default_rng(11)
    for _ in range(20):
        g0, gd0 = _spd_pair(rng)
        for t in (0.2, 0.7):

            def second_difference(h):
                return (
                    ambient_geodesic_point(g0, gd0, t + h)
                    - 2.0 * ambient_geodesic_point(g0, gd0, t)
                    + ambient_geodesic_point(g0, gd0, t - h)
                ) / h**2

            second = (4.0 * second_difference(5e-4) - second_difference(1e-3)) / 3.0
            expected = ambient_geodesic_acceleration(
                ambient_geodesic_point(g0, gd0, t), ambient_geodesic_velocity(g0, gd0, t)
            )
            assert np.linalg.norm(second - expected) / np.linalg.norm(expected) < 1e-6


def test_closed_form_matches_rk4():
    rng = np.random.default_rng(12)
    for _ in range(20):
        g0, gd0 = _spd_pair(rng)
        times, gammas = integrate_ambient_geodesic(g0, gd0, 1.0, 0.002)
        assert times[-1] == pytest.approx(1.0)
        for t, gamma in zip(times, gammas):
            exact = ambient_geodesic_point(g0, gd0, t)
            assert np.linalg.norm(gamma - exact) / np.linalg.norm(exact) < 1e-6


def test_rk4_rejects_bad_steps():
    with pytest.raises(DomainError):
        integrate_ambient_geodesic(np.eye(2), np.eye(2), 1.0, 0.0)
    with pytest.raises(DomainError):
        integrate_ambient_geodesic(np.eye(2), np.eye(2), 0.1, 0.2)


def test_geodesic_overflow_and_non_spd_start():
    with pytest.raises(OverflowError):
        ambient_geodesic_point(np.eye(2), np.diag([1000.0, 0.0]), 1.0)
    with pytest.raises(PositiveDefinitenessError):
        ambient_geodesic_point([[1.0, 2.0], [2.0, 1.0]], np.eye(2), 1.0)


def test_divergences_vanish_on_the_diagonal(grid):
    g, _ = random_field_pair(np.random.default_rng(4))
    assert kl_divergence(g, g, grid) == 0.0
    assert mi_divergence(g, g, grid) == 0.0
    assert mi_divergence(g, g, grid, form="reduced") == 0.0


def test_kl_constant_fields(grid):
    g = MetricField.constant(np.eye(2))
    h = MetricField.constant(2.0 * np.eye(2))
    assert kl_divergence(g, h, grid) == pytest.approx(-0.5 + 0.5 * math.log(4.0), rel=1e-12)


def test_kl_is_asymmetric(grid):
    g = MetricField.constant(2.0 * np.eye(2))
    h = MetricField.constant(np.eye(2))
    assert kl_divergence(g, h, grid) == pytest.approx(1.0 - math.log(2.0), rel=1e-12)
    assert kl_divergence(g, h, grid) == pytest.approx(0.306853, abs=1e-6)
    assert kl_divergence(h, g, grid) == pytest.approx(0.193147, abs=1e-6)


def test_mi_constant_fields(grid):
    g = MetricField.constant(np.eye(2))
    h = MetricField.constant(2.0 * np.eye(2))
    expected = 2.0 * math.log(1.5) + 2.0 * math.log(0.75)
    assert expected == pytest.approx(0.235566, abs=1e-6)
    assert mi_divergence(g, h, grid) == pytest.approx(expected, rel=1e-12)
    assert mi_divergence(h, g, grid) == pytest.approx(expected, rel=1e-12)
    assert mi_divergence(g, h, grid, form="reduced") == pytest.approx(expected, rel=1e-12)


def test_mi_forms_agree_and_are_symmetric(grid):
    rng = np.random.default_rng(5)
    for _ in range(10):
        g, _ = random_field_pair(rng)
        h, _ = random_field_pair(rng)
        symmetric = mi_divergence(g, h, grid)
        assert mi_divergence(g, h, grid, form="reduced") == pytest.approx(symmetric, rel=1e-10)
        assert mi_divergence(h, g, grid) == pytest.approx(symmetric, rel=1e-10)
        assert symmetric > 0
        assert kl_divergence(g, h, grid) > 0
    with pytest.raises(DomainError):
        mi_divergence(g, h, grid, form="halved")


def test_divergence_hessians_equal_half_the_metric(grid):
    rng = np.random.default_rng(6)
    g, h = random_field_pair(rng)
    expected = 0.5 * ambient_inner(g, h, h, grid)
    assert divergence_hessian(Divergence.KL, g, h, grid) == pytest.approx(expected, rel=1e-4)
    assert divergence_hessian("mi", g, h, grid) == pytest.approx(expected, rel=1e-4)


def test_divergence_check_fifty_pairs():
    report = divergence_check(seed=7, trials=50)
    assert report.trials == 50
    assert report.passed, report.max_relative_error


def test_divergence_first_derivative_vanishes(grid):
    g, h = random_field_pair(np.random.default_rng(8))
    scale = ambient_inner(g, h, h, grid)
    assert abs(divergence_slope(Divergence.KL, g, h, grid)) < 1e-6 * scale
    assert abs(divergence_slope(Divergence.MI, g, h, grid)) < 1e-6 * scale


def test_hessian_along_zero_direction(grid):
    g, _ = random_field_pair(np.random.default_rng(9))
    zero = TangentField.constant(np.zeros((2, 2)))
    assert divergence_hessian(Divergence.KL, g, zero, grid) == 0.0


def test_hessian_step_leaving_the_cone(grid):
    g = MetricField.constant(np.eye(2))
    h = TangentField.constant(np.eye(2))
    with pytest.raises(StepTooLargeError):
        divergence_hessian(Divergence.KL, g, h, grid, epsilon=10.0)
