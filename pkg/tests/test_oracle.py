import math

import numpy as np
import pytest
from scipy.integrate import quad

from polarpath.geometry import Point2
from polarpath.grids import polar_grid, sample
from polarpath.operators import STENCIL_REACH, apply_laplace_beltrami
from polarpath.oracle import (
    ExactKernelSpec,
    bessel_series_kernel,
    free_cover_kernel,
    free_polar_kernel,
    heat_kernel_cartesian,
    image_sum_kernel,
    standard_point_battery,
)

TWO_PI = 2.0 * math.pi


def test_heat_kernel_coincident_points():
    assert heat_kernel_cartesian((0.0, 0.0), (0.0, 0.0), 1.0) == pytest.approx(
        1.0 / (2.0 * math.pi), rel=1e-15
    )


def test_heat_kernel_unit_separation():
    val = heat_kernel_cartesian((1.0, 0.0), (0.0, 0.0), 1.0)
    assert val == pytest.approx(math.exp(-0.5) / (2.0 * math.pi), rel=1e-15)


def test_heat_kernel_normalization():
    # int K dx0 = 1: separable Gaussian quadrature oracle
    tau, m, hbar = 0.37, 1.3, 0.8
    one_dim, _ = quad(
        lambda x: math.sqrt(m / (2 * math.pi * hbar * tau))
        * math.exp(-m * x * x / (2 * hbar * tau)),
        -np.inf,
        np.inf,
    )
    assert one_dim ** 2 == pytest.approx(1.0, rel=1e-12)
    # grid check of the 2-D kernel itself
    xs = np.linspace(-6, 6, 801)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vals = heat_kernel_cartesian(
        np.stack([X, Y], axis=-1), np.zeros(2), tau, m, hbar
    )
    mass = np.trapezoid(np.trapezoid(vals, xs, axis=1), xs)
    assert mass == pytest.approx(1.0, abs=1e-10)


def test_free_polar_kernel_coincident():
    assert free_polar_kernel(1.7, 0.3, 1.7, 0.3, 0.25) == pytest.approx(
        1.0 / (2.0 * math.pi * 0.25), rel=1e-15
    )


def test_free_polar_kernel_rotation_invariance():
    for s in (0.7, 2.9, -1.3):
        assert free_polar_kernel(2.0, 0.4 + s, 1.2, 0.1 + s, 0.3) == pytest.approx(
            free_polar_kernel(2.0, 0.4, 1.2, 0.1, 0.3), rel=1e-14
        )


def test_free_polar_kernel_law_of_cosines():
    rng = np.random.default_rng(42)
    for _ in range(100):
        r, r0 = rng.uniform(0.2, 4.0, 2)
        th, th0 = rng.uniform(0.0, TWO_PI, 2)
        tau = rng.uniform(0.1, 1.0)
        cart = heat_kernel_cartesian(
            (r * math.cos(th), r * math.sin(th)),
            (r0 * math.cos(th0), r0 * math.sin(th0)),
            tau,
        )
        pol = free_polar_kernel(r, th, r0, th0, tau)
        assert abs(pol - cart) <= 1e-14 * max(1.0, cart)


def test_bessel_series_matches_closed_form():
    val = bessel_series_kernel(1.0, 0.4, 1.0, 0.0, 0.5, l_max=40)
    ref = free_polar_kernel(1.0, 0.4, 1.0, 0.0, 0.5)
    assert val == pytest.approx(ref, abs=1e-10)


def test_bessel_series_antipodal_asymmetry():
    for dth in (0.0, math.pi):
        val = bessel_series_kernel(1.3, dth, 0.9, 0.0, 0.5, l_max=48)
        ref = free_polar_kernel(1.3, dth, 0.9, 0.0, 0.5)
        assert val == pytest.approx(ref, abs=1e-10)


def test_bessel_zeroth_term_is_angular_average():
    # l_max=0 equivalent: I_0 term alone equals the angular average of the
    # closed form; independent quadrature oracle
    r, r0, tau = 1.4, 1.1, 0.5
    z = r * r0 / tau
    from scipy.special import ive

    term0 = (
        1.0
        / (2.0 * math.pi * tau)
        * math.exp(-((r - r0) ** 2) / (2.0 * tau))
        * ive(0, z)
    )
    avg, _ = quad(lambda a: free_polar_kernel(r, a, r0, 0.0, tau) / TWO_PI, 0, TWO_PI)
    assert term0 == pytest.approx(avg, rel=1e-8)


def test_bessel_truncation_tail_reported():
    val, tail = bessel_series_kernel(2.0, 0.0, 2.0, 0.0, 0.5, l_max=12, return_tail=True)
    assert tail > 0
    ref = free_polar_kernel(2.0, 0.0, 2.0, 0.0, 0.5)
    assert abs(val - ref) <= 10.0 * tail


def test_cover_kernel_periodization_is_plane_kernel():
    # sum over windings reproduces the single-sheet kernel (Poisson summation);
    # the truncation tail decays like 1/M, so doubling the winding count
    # roughly halves the defect
    for (r, r0, tau, dth) in [(1.0, 1.0, 0.5, 0.3), (2.0, 1.5, 0.25, 2.0), (1.2, 2.8, 0.5, 4.4)]:
        ref = free_polar_kernel(r, dth, r0, 0.0, tau)
        errs = []
        for M in (30, 60):
            total = sum(
                free_cover_kernel(r, dth + TWO_PI * k, r0, 0.0, tau)
                for k in range(-M, M + 1)
            )
            errs.append(abs(total - ref))
        assert errs[0] < 1e-4 * ref
        assert errs[1] < 0.7 * errs[0] + 1e-12


def test_cover_kernel_positive_and_decaying():
    vals = [free_cover_kernel(1.5, 0.2 + TWO_PI * k, 1.5, 0.0, 0.4) for k in range(5)]
    assert all(v > 0 for v in vals)
    assert all(vals[i + 1] < vals[i] for i in range(4))


def test_cover_kernel_off_cover_is_zero():
    assert free_cover_kernel(-1.0, 0.0, 1.0, 0.0, 0.5) == 0.0


def test_image_sum_periodicity_by_reindexing():
    # shifting theta by 2 pi re-indexes the winding sum; the difference is
    # bounded by the outermost tail terms
    val, tail = image_sum_kernel(
        free_cover_kernel, 1.5, 0.4, 1.2, 0.0, 0.5, M=6, return_tail=True
    )
    shifted = image_sum_kernel(free_cover_kernel, 1.5, 0.4 + TWO_PI, 1.2, 0.0, 0.5, M=6)
    assert abs(shifted - val) <= 2.0 * tail + 1e-13


def test_image_sum_small_tau_equals_single_sheet():
    # negative-radius continuation terms carry exp(-(r+r0)^2 / 2 hbar tau)
    val = image_sum_kernel(free_cover_kernel, 2.0, 0.1, 2.0, 0.0, 0.1, M=8)
    ref = free_polar_kernel(2.0, 0.1, 2.0, 0.0, 0.1)
    assert val == pytest.approx(ref, abs=1e-8)
    # the closed-form base also shows exponentially small -r terms at M=0
    direct = image_sum_kernel(free_polar_kernel, 2.0, 0.1, 2.0, 0.0, 0.1, M=0)
    assert direct == pytest.approx(ref, abs=1e-8)


def test_image_sum_agrees_with_bessel_series():
    rng = np.random.default_rng(3)
    for _ in range(8):
        r, r0 = rng.uniform(1.0, 3.0, 2)
        th, th0 = rng.uniform(0.0, TWO_PI, 2)
        img = image_sum_kernel(free_cover_kernel, r, th, r0, th0, 0.5, M=8)
        bes = bessel_series_kernel(r, th, r0, th0, 0.5, l_max=64)
        assert abs(img - bes) < 1e-4
    # lower radii need more windings to reach the same budget
    img = image_sum_kernel(free_cover_kernel, 0.5, 0.3, 0.5, 0.0, 0.5, M=64)
    bes = bessel_series_kernel(0.5, 0.3, 0.5, 0.0, 0.5, l_max=64)
    assert abs(img - bes) < 1e-3


def test_all_representations_pairwise_on_battery():
    battery = standard_point_battery()
    assert len(battery) == 20
    for tau in (0.25, 0.5):
        specs = [
            ExactKernelSpec(tau=tau, representation=rep)
            for rep in ("cartesian_closed_form", "polar_transform", "bessel_series", "image_sum")
        ]
        for (r, th, r0, th0) in battery:
            vals = [s.evaluate(r, th, r0, th0) for s in specs]
            for i in range(len(vals)):
                for j in range(i + 1, len(vals)):
                    assert abs(vals[i] - vals[j]) < 1e-4


def test_exact_kernel_satisfies_heat_equation():
    # d K / d tau = (hbar / 2m) nabla^2 K, via 4th-order spatial stencils and
    # centered tau differences on a local polar patch
    tau = 0.3
    q0 = Point2(1.6, 0.0)
    grid = polar_grid(0.9, 3.1, 441, 128)

    def kernel_field(t):
        return sample(
            grid, lambda r, th: free_polar_kernel(r, th, q0.q1, q0.q2, t)
        )

    d = tau / 256.0
    dk_dtau = (kernel_field(tau + d).values - kernel_field(tau - d).values) / (2 * d)
    lap = -apply_laplace_beltrami(kernel_field(tau), m=1.0, hbar=1.0).values
    sl = slice(STENCIL_REACH, -STENCIL_REACH)
    resid = dk_dtau[sl] - lap[sl]
    rel = np.linalg.norm(resid) / np.linalg.norm(lap[sl])
    assert rel < 1e-4


def test_semigroup_under_polar_measure():
    # int K(q, t1; q'') K(q'', t2; q0) r'' dr'' dth'' = K(q, t1+t2; q0)
    tau1, tau2 = 0.1, 0.15
    q = Point2(2.2, 0.5)
    q0 = Point2(1.8, 0.0)
    r = np.linspace(0.3, 4.5, 421)
    th = np.linspace(0.0, TWO_PI, 256, endpoint=False)
    R, TH = np.meshgrid(r, th, indexing="ij")
    k1 = free_polar_kernel(q.q1, q.q2, R, TH, tau1)
    k2 = free_polar_kernel(R, TH, q0.q1, q0.q2, tau2)
    integrand = k1 * k2 * R
    inner = np.sum(integrand, axis=1) * (TWO_PI / len(th))
    total = np.trapezoid(inner, r)
    ref = free_polar_kernel(q.q1, q.q2, q0.q1, q0.q2, tau1 + tau2)
    assert total == pytest.approx(ref, rel=1e-4)
