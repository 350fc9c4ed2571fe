"""Coordinate charts, metric data, integration measure and time-scaling functions.

Two flat 2-D charts are supported: cartesian coordinates (x, y) and plane
polar coordinates (r, theta).  Charts are closed descriptions (a kind tag
plus parameters), not open plug-ins, so downstream code and test oracles can
pattern-match on the chart kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi

CARTESIAN = "cartesian2d"
POLAR = "polar2d"

_CHART_KINDS = (CARTESIAN, POLAR)


class Point2(NamedTuple):
    """A point of a 2-D chart; (x, y) for cartesian, (r, theta) for polar."""

    q1: float
    q2: float


def canonicalize_angle(theta: float) -> float:
    """Wrap an angle into [0, 2*pi).

    Uses IEEE remainder so that adding exact multiples of the float 2*pi
    does not change the result.
    """
    wrapped = math.remainder(theta, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    if wrapped >= TWO_PI:  # remainder may return exactly pi-ish boundary
        wrapped -= TWO_PI
    return wrapped


@dataclass(frozen=True)
class Chart:
    """A 2-D coordinate chart of flat space.

    kind:   "cartesian2d" or "polar2d"
    r_min:  admissibility cutoff for the polar radial coordinate; grid
            constructions and kernel evaluations reject r < r_min.
    """

    kind: str
    r_min: float = 1e-6

    def __post_init__(self):
        if self.kind not in _CHART_KINDS:
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.r_min <= 0.0:
            raise ValueError("r_min must be positive")

    def require_admissible(self, q: Point2) -> None:
        if self.kind == POLAR and q.q1 < self.r_min:
            raise ValueError(f"polar point with r={q.q1} below r_min={self.r_min}")

    def canonicalize(self, q: Point2) -> Point2:
        if self.kind == POLAR:
            return Point2(q.q1, canonicalize_angle(q.q2))
        return q


def cartesian_chart() -> Chart:
    return Chart(CARTESIAN)


def polar_chart(r_min: float = 1e-6) -> Chart:
    return Chart(POLAR, r_min=r_min)


def metric(chart: Chart, q: Point2) -> np.ndarray:
    """Covariant metric components g_ij at q (diagonal for both charts)."""
    chart.require_admissible(q)
    if chart.kind == CARTESIAN:
        return np.eye(2)
    return np.diag([1.0, q.q1 ** 2])


def metric_inverse(chart: Chart, q: Point2) -> np.ndarray:
    """Contravariant metric components g^ij at q."""
    chart.require_admissible(q)
    if chart.kind == CARTESIAN:
        return np.eye(2)
    return np.diag([1.0, q.q1 ** (-2)])


def metric_inverse_diag(chart: Chart, q1: float | np.ndarray):
    """Diagonal of g^ij as a pair of arrays/scalars (both charts are diagonal).

    Vectorized over the radial/first coordinate; the second coordinate never
    enters the metric for these charts.
    """
    if chart.kind == CARTESIAN:
        one = np.ones_like(np.asarray(q1, dtype=float))
        return one, one
    q1 = np.asarray(q1, dtype=float)
    return np.ones_like(q1), q1 ** (-2)


def density(chart: Chart, q: Point2) -> float:
    """Metric density sqrt(g); the measure is density * dq1 dq2."""
    chart.require_admissible(q)
    if chart.kind == CARTESIAN:
        return 1.0
    return q.q1


def density_array(chart: Chart, q1) -> np.ndarray:
    """Vectorized sqrt(g) over the first coordinate."""
    q1 = np.asarray(q1, dtype=float)
    if chart.kind == CARTESIAN:
        return np.ones_like(q1)
    return q1.copy()


@dataclass(frozen=True)
class ScalingFunction:
    """A strictly positive local time-scaling function alpha(q).

    Two closed forms are supported:
      "unit"    alpha == 1 (no rescaling; kernels coincide with the unscaled ones)
      "sqrt_g"  alpha == sqrt(g), the choice that removes the spurious
                1/r^2 potential in curvilinear coordinates.
    """

    kind: str
    chart: Chart

    def __post_init__(self):
        if self.kind not in ("unit", "sqrt_g"):
            raise ValueError(f"unknown scaling kind {self.kind!r}")

    def __call__(self, q: Point2) -> float:
        if self.kind == "unit":
            return 1.0
        return density(self.chart, q)

    def values(self, q1) -> np.ndarray:
        q1 = np.asarray(q1, dtype=float)
        if self.kind == "unit":
            return np.ones_like(q1)
        return density_array(self.chart, q1)


def default_scaling(chart: Chart) -> ScalingFunction:
    """The sqrt(g) scaling function for a chart (identically 1 on cartesian)."""
    return ScalingFunction("sqrt_g", chart)


def unit_scaling(chart: Chart) -> ScalingFunction:
    """The constant scaling alpha == 1."""
    return ScalingFunction("unit", chart)


def measure_density(chart: Chart) -> ScalingFunction:
    """The measure density rho = sqrt(g) as an evaluator (rho * d^2q)."""
    return ScalingFunction("sqrt_g", chart)


def chart_from_id(chart_id: str, r_min: float = 1e-6) -> Chart:
    """Chart selection by string id, as used in experiment config files."""
    if chart_id == CARTESIAN:
        return cartesian_chart()
    if chart_id == POLAR:
        return polar_chart(r_min=r_min)
    raise ValueError(f"unknown chart id {chart_id!r}")
