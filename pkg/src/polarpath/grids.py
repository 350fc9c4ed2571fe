"""Uniform coordinate grids, sampled wavefunctions, and ring test functions.

Polar grids are uniform in r on [r_lo, r_hi] and uniform-periodic in theta
on [0, 2 pi).  Cartesian grids are uniform in both directions, non-periodic.
Quadrature weights follow the trapezoid rule in non-periodic directions and
are uniform in the periodic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import CARTESIAN, POLAR, Chart, cartesian_chart, polar_chart

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Grid2D:
    """Product grid on a chart; axis 0 is q1 (r or x), axis 1 is q2 (theta or y)."""

    chart: Chart
    q1: np.ndarray
    q2: np.ndarray

    @property
    def periodic_q2(self) -> bool:
        return self.chart.kind == POLAR

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.q1), len(self.q2)

    @property
    def dq1(self) -> float:
        return float(self.q1[1] - self.q1[0])

    @property
    def dq2(self) -> float:
        return float(self.q2[1] - self.q2[0])

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.q1, self.q2, indexing="ij")

    def density(self) -> np.ndarray:
        """sqrt(g) on the grid, broadcast to the full shape."""
        if self.chart.kind == CARTESIAN:
            return np.ones(self.shape)
        return np.repeat(self.q1[:, None], len(self.q2), axis=1)

    def quadrature_weights(self) -> np.ndarray:
        """Measure weights sqrt(g) * w1 * w2 (trapezoid / periodic-uniform)."""
        w1 = np.full(len(self.q1), self.dq1)
        w1[0] *= 0.5
        w1[-1] *= 0.5
        if self.periodic_q2:
            w2 = np.full(len(self.q2), self.dq2)
        else:
            w2 = np.full(len(self.q2), self.dq2)
            w2[0] *= 0.5
            w2[-1] *= 0.5
        return self.density() * w1[:, None] * w2[None, :]

    def node_index(self, q1: float, q2: float) -> tuple[int, int]:
        """Indices of the grid node nearest to (q1, q2)."""
        i = int(np.argmin(np.abs(self.q1 - q1)))
        if self.periodic_q2:
            d = np.abs(np.remainder(self.q2 - q2 + math.pi, TWO_PI) - math.pi)
            j = int(np.argmin(d))
        else:
            j = int(np.argmin(np.abs(self.q2 - q2)))
        return i, j


def polar_grid(r_lo: float, r_hi: float, n_r: int, n_theta: int, r_min: float = 1e-6) -> Grid2D:
    if r_lo < r_min:
        raise ValueError(f"r_lo={r_lo} below the polar cutoff r_min={r_min}")
    if r_hi <= r_lo:
        raise ValueError("r_hi must exceed r_lo")
    r = np.linspace(r_lo, r_hi, n_r)
    theta = np.arange(n_theta) * TWO_PI / n_theta
    return Grid2D(polar_chart(r_min=r_min), r, theta)


def cartesian_grid(lo: float, hi: float, n: int) -> Grid2D:
    x = np.linspace(lo, hi, n)
    return Grid2D(cartesian_chart(), x.copy(), x.copy())


@dataclass
class Wavefunction:
    """Samples of a (possibly complex) amplitude on a Grid2D."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    @property
    def chart(self) -> Chart:
        return self.grid.chart

    def norm_squared(self) -> float:
        w = self.grid.quadrature_weights()
        return float(np.sum(w * np.abs(self.values) ** 2))

    def normalized(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.values / math.sqrt(self.norm_squared()))


def sample(grid: Grid2D, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Wavefunction:
    q1, q2 = grid.meshes()
    return Wavefunction(grid, f(q1, q2))


@dataclass(frozen=True)
class GaussianRing:
    """Test amplitude exp(-s (r - r_bar)^2) * cos(l theta) with closed-form derivatives.

    Separates the radial and angular channels of polar operators: l = 0
    probes the radial part alone, l >= 1 adds a known theta-theta term.
    """

    s: float = 1.0
    r_bar: float = 2.0
    l: int = 1

    def radial(self, r):
        return np.exp(-self.s * (np.asarray(r, dtype=float) - self.r_bar) ** 2)

    def __call__(self, r, theta):
        return self.radial(r) * np.cos(self.l * np.asarray(theta, dtype=float))

    def d_r(self, r, theta):
        r = np.asarray(r, dtype=float)
        return -2.0 * self.s * (r - self.r_bar) * self(r, theta)

    def d_rr(self, r, theta):
        r = np.asarray(r, dtype=float)
        return (-2.0 * self.s + 4.0 * self.s ** 2 * (r - self.r_bar) ** 2) * self(r, theta)

    def d_thth(self, r, theta):
        return -(self.l ** 2) * self(r, theta)

    def laplace_beltrami(self, r, theta):
        """The invariant Laplacian psi_rr + psi_r / r + psi_thth / r^2."""
        r = np.asarray(r, dtype=float)
        return self.d_rr(r, theta) + self.d_r(r, theta) / r + self.d_thth(r, theta) / r ** 2


def default_rings() -> list[GaussianRing]:
    """The shipped wavefunction battery: a Gaussian ring times 1, cos, cos 2."""
    return [GaussianRing(l=0), GaussianRing(l=1), GaussianRing(l=2)]
