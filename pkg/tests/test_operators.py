import math

import numpy as np
import pytest

from polarpath.geometry import Point2, default_scaling, measure_density, unit_scaling
from polarpath.grids import GaussianRing, Wavefunction, cartesian_grid, polar_grid, sample
from polarpath.operators import (
    STENCIL_REACH,
    apply_canonical_polar,
    apply_h_rho_alpha,
    apply_laplace_beltrami,
    diff1,
    diff2,
    inner_product,
)

PAD = 4 * STENCIL_REACH


def interior(values, pad=STENCIL_REACH, periodic=True):
    sl1 = slice(None) if periodic else slice(pad, -pad)
    return values[pad:-pad, sl1]


@pytest.fixture(scope="module")
def op_grid():
    return polar_grid(0.5, 3.5, 640, 1024)


def test_laplace_beltrami_harmonic_log(op_grid):
    psi = sample(op_grid, lambda r, th: np.log(r))
    out = apply_laplace_beltrami(psi)
    assert np.nanmax(np.abs(interior(out.values))) < 1e-6


def test_laplace_beltrami_harmonic_r_cos_theta(op_grid):
    psi = sample(op_grid, lambda r, th: r * np.cos(th))
    out = apply_laplace_beltrami(psi)
    assert np.nanmax(np.abs(interior(out.values))) < 1e-6


def test_laplace_beltrami_r_squared(op_grid):
    # nabla^2 r^2 = 4, so the operator gives -2 hbar^2 / m everywhere
    psi = sample(op_grid, lambda r, th: r ** 2)
    out = apply_laplace_beltrami(psi, m=1.0, hbar=1.0)
    assert np.nanmax(np.abs(interior(out.values) + 2.0)) < 1e-6


def test_canonical_polar_on_constant(op_grid):
    psi = sample(op_grid, lambda r, th: np.ones_like(r))
    out = apply_canonical_polar(psi)
    r = op_grid.q1[:, None]
    expected = 1.0 / (8.0 * r ** 2)
    assert np.nanmax(np.abs(interior(out.values - expected))) < 1e-10


def test_canonical_polar_on_r_squared(op_grid):
    # Laplacian part gives -2, ordering term gives +1/8, at every radius
    psi = sample(op_grid, lambda r, th: r ** 2)
    out = apply_canonical_polar(psi)
    assert np.nanmax(np.abs(interior(out.values) - (-2.0 + 0.125))) < 1e-6


def test_canonical_minus_lb_is_multiplication(op_grid):
    psi = sample(op_grid, GaussianRing(s=1.0, r_bar=2.0, l=1))
    diff = apply_canonical_polar(psi).values - apply_laplace_beltrami(psi).values
    r = op_grid.q1[:, None]
    expected = psi.values / (8.0 * r ** 2)
    assert np.nanmax(np.abs(interior(diff - expected))) < 1e-10


def test_h_rho_alpha_sqrtg_matches_laplace_beltrami(op_grid):
    rho = measure_density(op_grid.chart)
    alpha = default_scaling(op_grid.chart)
    psi = sample(op_grid, GaussianRing(s=1.0, r_bar=2.0, l=2))
    hra = apply_h_rho_alpha(psi, rho, alpha)
    lb = apply_laplace_beltrami(psi)
    diff = np.abs(hra.values[PAD:-PAD] - lb.values[PAD:-PAD])
    assert np.nanmax(diff) < 1e-8


def test_h_rho_alpha_cartesian_flat_laplacian():
    grid = cartesian_grid(-4.0, 4.0, 640)
    one = unit_scaling(grid.chart)
    psi = sample(grid, lambda x, y: np.exp(-(x ** 2) - y ** 2))
    out = apply_h_rho_alpha(psi, one, one)
    X, Y = grid.meshes()
    analytic = -0.5 * (4.0 * (X ** 2 + Y ** 2) - 4.0) * np.exp(-(X ** 2) - Y ** 2)
    diff = np.abs(out.values[PAD:-PAD, PAD:-PAD] - analytic[PAD:-PAD, PAD:-PAD])
    assert np.nanmax(diff) < 1e-6


def test_h_rho_alpha_unit_alpha_is_multiplication_shift(op_grid):
    # rho = sqrt g, alpha = 1: the operator differs from Laplace-Beltrami by
    # a pure function of r; acting on a constant it returns + hbar^2/(8 m r^2)
    rho = measure_density(op_grid.chart)
    one = unit_scaling(op_grid.chart)
    psi = sample(op_grid, lambda r, th: np.ones_like(r))
    out = apply_h_rho_alpha(psi, rho, one)
    r = op_grid.q1[:, None]
    expected = 1.0 / (8.0 * r ** 2)
    # rows with r >= 1: the nested stencil error on sqrt(r) grows like r^{-9/2}
    rows = slice(int(np.searchsorted(op_grid.q1, 1.0)), -PAD)
    diff = np.abs(out.values[rows] - expected[rows])
    assert np.nanmax(diff) < 1e-9
    # and the same shift appears on a generic ring
    ring = sample(op_grid, GaussianRing(s=1.0, r_bar=2.0, l=1))
    shift = apply_h_rho_alpha(ring, rho, one).values - apply_laplace_beltrami(ring).values
    assert np.nanmax(np.abs(shift[rows] - expected[rows] * ring.values[rows])) < 1e-8


@pytest.mark.parametrize("op_name", ["lb", "canonical", "h_rho_alpha"])
def test_hermiticity(op_name):
    grid = polar_grid(0.3, 4.5, 640, 256)
    rho = measure_density(grid.chart)
    alpha = default_scaling(grid.chart)
    ops = {
        "lb": apply_laplace_beltrami,
        "canonical": apply_canonical_polar,
        "h_rho_alpha": lambda w: apply_h_rho_alpha(w, rho, alpha),
    }
    op = ops[op_name]
    psi = sample(grid, GaussianRing(s=6.0, r_bar=2.0, l=1))
    phi_fn = GaussianRing(s=5.0, r_bar=2.2, l=1)
    phi = sample(grid, phi_fn)
    a = inner_product(phi, op(psi))
    b = inner_product(op(phi), psi)
    assert abs(a - b) / abs(a) < 1e-6


def test_linearity():
    # a coarser grid keeps the 1/h^2 roundoff amplification of the stencils
    # below the linearity budget
    grid = polar_grid(0.5, 3.5, 160, 64)
    w1 = sample(grid, GaussianRing(s=2.0, r_bar=1.8, l=0))
    w2 = sample(grid, GaussianRing(s=3.0, r_bar=2.4, l=2))
    combo = Wavefunction(grid, 0.7 * w1.values + 1.3 * w2.values)
    lhs = apply_laplace_beltrami(combo).values
    rhs = 0.7 * apply_laplace_beltrami(w1).values + 1.3 * apply_laplace_beltrami(w2).values
    scale = np.nanmax(np.abs(lhs))
    assert np.nanmax(np.abs(lhs - rhs)) < 1e-12 * scale


def test_stencils_on_polynomials():
    # 4th-order stencils are exact on quartics
    x = np.linspace(0.0, 1.0, 101)
    h = x[1] - x[0]
    vals = (x ** 4)[:, None] * np.ones((101, 4))
    d1 = diff1(vals, h, 0, False)
    d2 = diff2(vals, h, 0, False)
    sl = slice(STENCIL_REACH, -STENCIL_REACH)
    assert np.nanmax(np.abs(d1[sl, 0] - 4 * x[sl] ** 3)) < 1e-12
    assert np.nanmax(np.abs(d2[sl, 0] - 12 * x[sl] ** 2)) < 1e-11


def test_periodic_theta_direction_has_no_boundary(op_grid):
    psi = sample(op_grid, GaussianRing(s=1.0, r_bar=2.0, l=3))
    out = apply_laplace_beltrami(psi)
    assert not np.any(np.isnan(out.values[STENCIL_REACH:-STENCIL_REACH, :]))
