import math

import numpy as np
import pytest

from polarpath.geometry import (
    Point2,
    canonicalize_angle,
    cartesian_chart,
    chart_from_id,
    default_scaling,
    density,
    measure_density,
    metric,
    metric_inverse,
    polar_chart,
    unit_scaling,
)

TWO_PI = 2.0 * math.pi


def test_metric_inverse_polar_r2():
    g_inv = metric_inverse(polar_chart(), Point2(2.0, 0.3))
    assert np.allclose(np.diag(g_inv), [1.0, 0.25], rtol=0, atol=0)


def test_metric_inverse_cartesian_identity():
    g_inv = metric_inverse(cartesian_chart(), Point2(-3.7, 12.0))
    assert np.array_equal(g_inv, np.eye(2))


def test_metric_inverse_polar_unit_radius():
    assert np.allclose(metric_inverse(polar_chart(), Point2(1.0, 1.0)), np.eye(2))


def test_metric_inverse_domain_error():
    with pytest.raises(ValueError):
        metric_inverse(polar_chart(), Point2(0.0, 0.0))
    with pytest.raises(ValueError):
        metric_inverse(polar_chart(), Point2(-1.0, 0.0))


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_density_polar(r):
    assert density(polar_chart(), Point2(r, 1.2)) == r


def test_density_cartesian():
    assert density(cartesian_chart(), Point2(4.0, -2.0)) == 1.0


def test_default_scaling_matches_density():
    ch = polar_chart()
    alpha = default_scaling(ch)
    assert alpha(Point2(3.0, 0.0)) == 3.0
    assert default_scaling(cartesian_chart())(Point2(5.0, 5.0)) == 1.0
    assert unit_scaling(ch)(Point2(3.0, 0.0)) == 1.0


@pytest.mark.parametrize("chart", [polar_chart(), cartesian_chart()])
def test_metric_inverse_is_inverse(chart):
    rng = np.random.default_rng(7)
    for _ in range(25):
        q = Point2(float(rng.uniform(0.1, 5.0)), float(rng.uniform(0.0, TWO_PI)))
        prod = metric(chart, q) @ metric_inverse(chart, q)
        assert np.max(np.abs(prod - np.eye(2))) < 1e-12


@pytest.mark.parametrize("chart", [polar_chart(), cartesian_chart()])
def test_density_squared_is_det_metric(chart):
    rng = np.random.default_rng(8)
    for _ in range(25):
        q = Point2(float(rng.uniform(0.1, 5.0)), float(rng.uniform(0.0, TWO_PI)))
        det = np.linalg.det(metric(chart, q))
        assert abs(density(chart, q) ** 2 - det) < 1e-12 * max(1.0, det)


def test_canonicalize_exact_shift_invariance():
    # dyadic angles make theta + 2 pi k exact in float arithmetic
    for theta in (0.5, 1.25, 3.75, 5.5):
        ref = canonicalize_angle(theta)
        for k in range(-3, 4):
            assert canonicalize_angle(theta + TWO_PI * k) == ref


def test_canonicalize_range():
    for theta in np.linspace(-20.0, 20.0, 101):
        w = canonicalize_angle(float(theta))
        assert 0.0 <= w < TWO_PI


def test_chart_from_id():
    assert chart_from_id("polar2d").kind == "polar2d"
    assert chart_from_id("cartesian2d").kind == "cartesian2d"
    with pytest.raises(ValueError):
        chart_from_id("spherical")


def test_measure_density_is_sqrt_g():
    rho = measure_density(polar_chart())
    assert rho(Point2(2.5, 0.0)) == 2.5
