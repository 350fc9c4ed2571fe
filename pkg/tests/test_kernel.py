import math

import numpy as np
import pytest
from scipy.integrate import quad

from polarpath.generators import Hamiltonian, PseudoHamiltonian
from polarpath.geometry import (
    Point2,
    cartesian_chart,
    default_scaling,
    polar_chart,
    unit_scaling,
)
from polarpath.kernel import (
    GridQuadrature,
    MonteCarloQuadrature,
    SliceConfig,
    apply_stp_to_probe,
    compose,
    delta_limit_check,
    iterate_kernel,
    read_kernel_binary,
    short_time_kernel,
    write_kernel_binary,
    write_kernel_csv,
)
from polarpath.oracle import heat_kernel_cartesian

TWO_PI = 2.0 * math.pi


def cart_h(m=1.0, hbar=1.0):
    chart = cartesian_chart()
    return chart, PseudoHamiltonian(Hamiltonian(chart, mass=m, hbar=hbar), unit_scaling(chart), 0.0)


def polar_pseudo(E=0.0, m=1.0, hbar=1.0):
    chart = polar_chart()
    return chart, PseudoHamiltonian(
        Hamiltonian(chart, mass=m, hbar=hbar), default_scaling(chart), E
    )


def polar_unscaled(m=1.0, hbar=1.0):
    chart = polar_chart()
    return chart, PseudoHamiltonian(Hamiltonian(chart, mass=m, hbar=hbar), unit_scaling(chart), 0.0)


# ---------------------------------------------------------------------------
# short-time kernel closed form
# ---------------------------------------------------------------------------


def test_cartesian_stp_is_heat_kernel_step():
    chart, h = cart_h()
    rng = np.random.default_rng(1)
    for _ in range(20):
        q2 = Point2(*rng.uniform(-2, 2, 2))
        q1 = Point2(*rng.uniform(-2, 2, 2))
        eps = float(rng.uniform(0.05, 1.0))
        val = short_time_kernel(chart, q2, q1, eps, h)
        ref = heat_kernel_cartesian(tuple(q2), tuple(q1), eps)
        assert val == pytest.approx(float(ref), rel=1e-14)


def test_cartesian_stp_coincident_value():
    chart, h = cart_h()
    val = short_time_kernel(chart, Point2(0, 0), Point2(0, 0), 1.0, h)
    assert val == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-15)


def _momentum_quadrature_stp(chart, h, q2, q1, eps):
    """Direct 2-D numeric momentum integral of the Euclidean slice weight."""
    m = h.mass
    hbar = h.hbar
    k1a, k2a = h.kinetic_coeffs(q2.q1)
    k1b, k2b = h.kinetic_coeffs(q1.q1)
    c1 = 0.5 * (float(k1a) + float(k1b))
    c2 = 0.5 * (float(k2a) + float(k2b))
    d1 = q2.q1 - q1.q1
    d2 = q2.q2 - q1.q2
    from polarpath.geometry import density

    rho = density(chart, q1) * density(chart, q2)

    def gauss(c, d):
        re, _ = quad(
            lambda P: math.cos(P * d / hbar) * math.exp(-eps * c * P * P / (2.0 * m * hbar)),
            -np.inf,
            np.inf,
            epsabs=0,
            epsrel=1e-13,
        )
        return re / (2.0 * math.pi * hbar)

    return rho ** (-0.5) * gauss(c1, d1) * gauss(c2, d2)


def test_polar_stp_matches_momentum_quadrature():
    chart, h = polar_pseudo()
    cases = [
        (Point2(1.0, 0.0), Point2(1.0, 0.0), 0.2),
        (Point2(1.3, 0.4), Point2(1.1, 0.3), 0.15),
        (Point2(2.4, 5.9), Point2(2.6, 6.1), 0.05),
    ]
    for q2, q1, eps in cases:
        closed = short_time_kernel(chart, q2, q1, eps, h)
        numeric = _momentum_quadrature_stp(chart, h, q2, q1, eps)
        assert closed == pytest.approx(numeric, rel=1e-10)


def test_unscaled_polar_stp_matches_momentum_quadrature():
    chart, h = polar_unscaled()
    q2, q1, eps = Point2(1.8, 0.2), Point2(2.0, 0.35), 0.1
    closed = short_time_kernel(chart, q2, q1, eps, h)
    numeric = _momentum_quadrature_stp(chart, h, q2, q1, eps)
    assert closed == pytest.approx(numeric, rel=1e-10)


def test_stp_symmetric_and_positive():
    chart, h = polar_pseudo()
    rng = np.random.default_rng(2)
    for _ in range(20):
        q2 = Point2(float(rng.uniform(0.5, 3)), float(rng.uniform(0, TWO_PI)))
        q1 = Point2(float(rng.uniform(0.5, 3)), float(rng.uniform(0, TWO_PI)))
        eps = float(rng.uniform(0.01, 0.3))
        a = short_time_kernel(chart, q2, q1, eps, h)
        b = short_time_kernel(chart, q1, q2, eps, h)
        assert a > 0
        assert a == pytest.approx(b, rel=1e-14)


def test_stp_domain_errors():
    chart, h = polar_pseudo()
    with pytest.raises(ValueError):
        short_time_kernel(chart, Point2(0.0, 0.0), Point2(1.0, 0.0), 0.1, h)
    with pytest.raises(ValueError):
        short_time_kernel(chart, Point2(1.0, 0.0), Point2(1.0, 0.0), -0.1, h)


# ---------------------------------------------------------------------------
# iterated kernel
# ---------------------------------------------------------------------------


def test_single_slice_reproduces_stp():
    chart, h = polar_pseudo()
    config = SliceConfig(1, 0.05, GridQuadrature(24, 16, 0.8, 3.2))
    kernel = iterate_kernel(config, chart, h)
    i = 7
    j = 100
    q1, q2 = kernel.node_coordinates()
    direct = short_time_kernel(chart, Point2(q1[i], q2[i]), Point2(q1[j], q2[j]), 0.05, h)
    assert kernel.values[i, j] == pytest.approx(direct, rel=1e-13)


def _central_error_vs_exact(kernel, tau):
    grid = kernel.grid
    i0, j0 = grid.node_index(0.0, 0.0)
    col = np.ravel_multi_index((i0, j0), grid.shape)
    q1, q2 = kernel.node_coordinates()
    exact = heat_kernel_cartesian(
        np.stack([q1, q2], axis=-1), np.array([grid.q1[i0], grid.q2[j0]]), tau
    )
    central = (np.abs(q1) <= 3.0) & (np.abs(q2) <= 3.0)
    return float(np.max(np.abs(kernel.values[:, col] - exact)[central] / exact[central]))


def test_cartesian_iterated_kernel_matches_exact():
    # the acceptance suite runs the full-size case; this covers the machinery
    chart, h = cart_h()
    tau, n_slices = 0.5, 4
    config = SliceConfig(n_slices, tau / n_slices, GridQuadrature(48, 48, -6.0, 6.0))
    kernel = iterate_kernel(config, chart, h)
    assert _central_error_vs_exact(kernel, tau) <= 0.02
    # mass conservation away from the truncated boundary; a node a distance d
    # from the edge loses about erfc(d / sqrt(2 tau)) of its mass, so the
    # tolerance tightens toward the center
    masses = kernel.masses()
    q1, q2 = kernel.node_coordinates()
    central = (np.abs(q1) <= 3.0) & (np.abs(q2) <= 3.0)
    assert np.max(np.abs(masses[central] - 1.0)) < 1e-4
    inner = (np.abs(q1) <= 2.0) & (np.abs(q2) <= 2.0)
    assert np.max(np.abs(masses[inner] - 1.0)) < 1e-7
    report = kernel.mass_loss_report()
    assert report["max_mass_deficit"] > 0.01  # edge truncation is visible
    assert report["exceeds_threshold"]


def test_cartesian_refinement_reduces_error():
    chart, h = cart_h()
    tau, n_slices = 0.5, 4
    errs = []
    for n in (24, 48):
        config = SliceConfig(n_slices, tau / n_slices, GridQuadrature(n, n, -6.0, 6.0))
        errs.append(_central_error_vs_exact(iterate_kernel(config, chart, h), tau))
    assert errs[1] < errs[0]


def test_euclidean_positivity_and_symmetry():
    chart, h = polar_pseudo()
    config = SliceConfig(4, 0.02, GridQuadrature(28, 20, 0.7, 3.3))
    kernel = iterate_kernel(config, chart, h)
    assert np.all(kernel.values >= 0.0)
    asym = np.max(np.abs(kernel.values - kernel.values.T)) / np.max(kernel.values)
    assert asym < 1e-8


def test_semigroup_composition():
    chart, h = cart_h()
    quad_spec = GridQuadrature(44, 44, -6.0, 6.0)
    k1 = iterate_kernel(SliceConfig(4, 0.05, quad_spec), chart, h)
    k2 = iterate_kernel(SliceConfig(4, 0.075, quad_spec), chart, h)
    k12 = compose(k1, k2)
    direct = iterate_kernel(SliceConfig(8, 0.0625, quad_spec), chart, h)
    assert k12.time == pytest.approx(direct.time, rel=1e-15)
    grid = k1.grid
    i0, j0 = grid.node_index(0.0, 0.0)
    col = np.ravel_multi_index((i0, j0), grid.shape)
    q1, q2 = k1.node_coordinates()
    central = (np.abs(q1) <= 3.0) & (np.abs(q2) <= 3.0)
    a = k12.values[central, col]
    b = direct.values[central, col]
    assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12)) < 0.01


def test_monte_carlo_matches_exact_cartesian():
    chart, h = cart_h()
    config = SliceConfig(
        4, 0.1, MonteCarloQuadrature(samples=20000, seed=123, source=(0.0, 0.0))
    )
    kernel = iterate_kernel(config, chart, h)
    q1, q2 = kernel.node_coordinates()
    exact = heat_kernel_cartesian(np.stack([q1, q2], axis=-1), np.zeros(2), 0.4)
    sel = exact > 0.05
    err = np.abs(kernel.values[:, 0] - exact)[sel]
    bound = 5.0 * kernel.mc_stderr[:, 0][sel] + 1e-4
    assert np.all(err <= bound)


def test_monte_carlo_deterministic_given_seed():
    chart, h = cart_h()
    config = SliceConfig(3, 0.1, MonteCarloQuadrature(samples=2000, seed=7))
    a = iterate_kernel(config, chart, h)
    b = iterate_kernel(config, chart, h)
    assert np.array_equal(a.values, b.values)


# ---------------------------------------------------------------------------
# delta limit
# ---------------------------------------------------------------------------


def test_delta_limit_cartesian_mass_exact():
    chart, h = cart_h()
    one = lambda a, b: np.ones_like(a)
    for eps in (1e-2, 1e-3):
        mass = apply_stp_to_probe(chart, h, Point2(0.3, -0.2), eps, one)
        assert mass == pytest.approx(1.0, abs=1e-12)


def test_delta_limit_polar_probe_reproduction():
    # the deviation from f follows the small-eps expansion: first order in
    # eps with the generator scale of the kernel in use
    from polarpath.grids import GaussianRing

    probe = GaussianRing(s=1.0, r_bar=2.0, l=0)
    q = Point2(2.0, 0.0)

    # unscaled free-particle kernel: error = eps * |LB f + f/(8 r^2)| + O(eps^2)
    chart, h = polar_unscaled()
    predicted = 1.0 + 1.0 / (8.0 * q.q1 ** 2)  # -(1/2) f_rr + f/(8 r^2) at the ring center
    for eps in (1e-3, 5e-4):
        val = apply_stp_to_probe(chart, h, q, eps, probe)
        assert 1.0 - val == pytest.approx(eps * predicted, rel=0.05)

    # pseudo-Hamiltonian kernel: first-order in eps (halving eps halves it)
    chart, h = polar_pseudo()
    errs = [1.0 - apply_stp_to_probe(chart, h, q, eps, probe) for eps in (1e-3, 5e-4)]
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.02)
    assert abs(errs[0]) < 3e-3


def test_delta_limit_report_rates():
    chart, h = polar_unscaled()
    report = delta_limit_check(chart, h, [4e-3, 2e-3, 1e-3, 5e-4])
    # normalization deficit of the unscaled polar kernel is O(eps) with
    # coefficient hbar/(8 m r^2) (the spurious-potential coefficient)
    assert report.mass_rate == pytest.approx(1.0, abs=0.05)
    r = 2.0
    predicted = np.array(report.eps_values) / (8.0 * r * r)
    assert np.allclose(report.mass_deficits, predicted, rtol=0.02)
    for rate in report.probe_rates.values():
        assert rate == pytest.approx(1.0, abs=0.15)


def test_scaled_polar_mass_deficit_is_second_order():
    chart, h = polar_pseudo()
    report = delta_limit_check(chart, h, [4e-3, 2e-3, 1e-3])
    # alpha = sqrt(g): no spurious potential at first order; the deficit of
    # the single-slice kernel is O(eps^2)... the reduced single-slice kernel
    # differs (its defect is 1/(2N^2 r^2) at N=1); the unscaled machinery
    # with the pseudo-Hamiltonian has its own first-order deficit
    assert all(abs(d) < 2e-3 for d in report.mass_deficits)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_binary_roundtrip(tmp_path):
    chart, h = polar_pseudo()
    config = SliceConfig(2, 0.05, GridQuadrature(16, 12, 0.8, 3.0))
    kernel = iterate_kernel(config, chart, h)
    path = tmp_path / "kernel.bin"
    write_kernel_binary(path, kernel)
    back = read_kernel_binary(path)
    assert np.array_equal(back.values, kernel.values)
    assert back.eps == kernel.eps
    assert back.n_slices == kernel.n_slices
    assert back.grid.chart.kind == "polar2d"
    assert not back.scaled


def test_csv_dump_schema(tmp_path):
    chart, h = polar_pseudo()
    config = SliceConfig(1, 0.05, GridQuadrature(8, 8, 0.8, 3.0))
    kernel = iterate_kernel(config, chart, h)
    path = tmp_path / "kernel.csv"
    write_kernel_csv(path, kernel)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        first = fh.readline().strip().split(",")
    assert header == ["r", "theta", "r0", "theta0", "value"]
    assert len(first) == 5
    assert float(first[4]) == pytest.approx(kernel.values[0, 0], rel=1e-15)
