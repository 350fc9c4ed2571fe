"""The canonical path integral built from short-time propagators.

All numerics are Euclidean (Wick-rotated): the momentum integrals of the
short-time propagator are Gaussian and done in closed form, so only the
coordinate integrals are discretized.  A kernel over a product grid is
composed by Chapman-Kolmogorov iteration with the measure sqrt(g) dq at the
intermediate points, either as a weighted matrix product or by importance
sampling of paths with a deterministic seed.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._pool import map_in_chunks
from .geometry import CARTESIAN, POLAR, Chart, Point2, density_array
from .generators import PseudoHamiltonian
from .grids import Grid2D, TWO_PI, cartesian_grid, polar_grid

__all__ = [
    "SliceConfig",
    "KernelGrid",
    "short_time_kernel",
    "stp_matrix",
    "iterate_kernel",
    "compose",
    "apply_stp_to_probe",
    "stp_action",
    "DeltaLimitReport",
    "delta_limit_check",
    "write_kernel_csv",
    "write_kernel_binary",
    "read_kernel_binary",
]

_CHART_IDS = {CARTESIAN: 0, POLAR: 1}
_CHART_FROM_ID = {v: k for k, v in _CHART_IDS.items()}
_ALPHA_IDS = {"none": 0, "unit": 1, "sqrt_g": 2}
_ALPHA_FROM_ID = {v: k for k, v in _ALPHA_IDS.items()}


@dataclass(frozen=True)
class GridQuadrature:
    n_q1: int
    n_q2: int
    q1_lo: float
    q1_hi: float

    def __post_init__(self):
        if self.n_q1 < 8 or self.n_q2 < 8:
            raise ValueError("grid sizes must be at least 8")
        if self.q1_hi <= self.q1_lo:
            raise ValueError("q1_hi must exceed q1_lo")


@dataclass(frozen=True)
class MonteCarloQuadrature:
    samples: int
    seed: int
    source: tuple[float, float] = (2.0, 0.0)

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be positive")


@dataclass(frozen=True)
class SliceConfig:
    """Discretization of the pseudo-time interval into N slices of step eps."""

    n_slices: int
    eps: float
    quadrature: GridQuadrature | MonteCarloQuadrature
    mode: str = "euclidean"

    def __post_init__(self):
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.mode != "euclidean":
            raise ValueError("only euclidean mode is supported")

    @property
    def total_time(self) -> float:
        return self.n_slices * self.eps


@dataclass
class KernelGrid:
    """Sampled kernel values K(q, q0) with the grid's measure attached.

    values has shape (n_nodes, n_nodes) for grid quadrature (row = q,
    column = q0) or (n_nodes, 1) for a Monte Carlo estimate from a single
    source point.
    """

    grid: Grid2D
    values: np.ndarray
    time: float
    eps: float
    n_slices: int
    scaled: bool = False
    alpha_id: str = "none"
    source: Optional[Point2] = None
    mc_stderr: Optional[np.ndarray] = None

    @property
    def n_nodes(self) -> int:
        return self.grid.shape[0] * self.grid.shape[1]

    def node_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        q1, q2 = self.grid.meshes()
        return q1.ravel(), q2.ravel()

    def measure_weights(self) -> np.ndarray:
        return self.grid.quadrature_weights().ravel()

    def masses(self) -> np.ndarray:
        """Row integrals int K(q, q0) sqrt(g) dq0 (unit for an exact kernel)."""
        if self.values.shape[1] != self.n_nodes:
            raise ValueError("masses need a full grid kernel")
        return self.values @ self.measure_weights()

    def mass_loss_report(self, threshold: float = 0.01) -> dict:
        masses = self.masses()
        loss = float(np.max(1.0 - masses))
        return {
            "max_mass_deficit": loss,
            "median_mass": float(np.median(masses)),
            "exceeds_threshold": bool(loss > threshold),
        }

    def value_at(self, q: Point2, q0: Point2) -> float:
        i = np.ravel_multi_index(self.grid.node_index(*q), self.grid.shape)
        if self.values.shape[1] == 1:
            return float(self.values[i, 0])
        j = np.ravel_multi_index(self.grid.node_index(*q0), self.grid.shape)
        return float(self.values[i, j])


def _symmetrized_coefficients(h_spec: PseudoHamiltonian, q1_a, q1_b):
    """Gaussian quadratic-form coefficients (c1, c2) for a slice a -> b."""
    ka1, ka2 = h_spec.kinetic_coeffs(q1_a)
    kb1, kb2 = h_spec.kinetic_coeffs(q1_b)
    return 0.5 * (ka1 + kb1), 0.5 * (ka2 + kb2)


def _stp_values(
    chart: Chart,
    q1_a,
    q2_a,
    q1_b,
    q2_b,
    eps: float,
    h_spec: PseudoHamiltonian,
    n_theta_images: int = 0,
):
    """Vectorized Euclidean short-time propagator between point arrays.

    (a) is the later slice argument, (b) the earlier one; the kernel is
    symmetric under their exchange.  For periodic charts, winding images of
    the angular Gaussian can be added.
    """
    m = h_spec.mass
    hbar = h_spec.hbar
    c1, c2 = _symmetrized_coefficients(h_spec, q1_a, q1_b)
    if np.any(c1 <= 0.0) or np.any(c2 <= 0.0):
        raise ValueError("momentum quadratic form is not positive definite")
    rho = density_array(chart, q1_a) * density_array(chart, q1_b)
    pref = (
        rho ** (-0.5)
        * np.sqrt(m / (2.0 * math.pi * hbar * eps * c1))
        * np.sqrt(m / (2.0 * math.pi * hbar * eps * c2))
    )
    d1 = np.asarray(q1_a, dtype=float) - np.asarray(q1_b, dtype=float)
    d2 = np.asarray(q2_a, dtype=float) - np.asarray(q2_b, dtype=float)
    scale = m / (2.0 * hbar * eps)
    gauss1 = np.exp(-scale * d1 * d1 / c1)
    if chart.kind == POLAR:
        d2 = np.remainder(d2 + math.pi, TWO_PI) - math.pi
        gauss2 = np.exp(-scale * d2 * d2 / c2)
        for k in range(1, n_theta_images + 1):
            gauss2 = gauss2 + np.exp(-scale * (d2 + TWO_PI * k) ** 2 / c2)
            gauss2 = gauss2 + np.exp(-scale * (d2 - TWO_PI * k) ** 2 / c2)
    else:
        gauss2 = np.exp(-scale * d2 * d2 / c2)
    # momentum-independent part of h enters as exp(-eps * mean shift / hbar)
    wa = h_spec.alpha.values(q1_a) * (-h_spec.energy)
    wb = h_spec.alpha.values(q1_b) * (-h_spec.energy)
    if h_spec.base.potential is not None:
        raise NotImplementedError("nonzero potentials are out of scope for kernel numerics")
    shift = np.exp(-eps * 0.5 * (wa + wb) / hbar)
    return pref * gauss1 * gauss2 * shift


def short_time_kernel(
    chart: Chart,
    q2: Point2,
    q1: Point2,
    eps: float,
    h_spec: PseudoHamiltonian,
) -> float:
    """Closed-form Euclidean canonical short-time propagator.

    (rho(q1) rho(q2))^{-1/2} times the Gaussian momentum integrals of
    exp(-S_E/hbar), with the slice action's symmetric endpoint coefficients.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    chart.require_admissible(q1)
    chart.require_admissible(q2)
    return float(
        _stp_values(chart, q2.q1, q2.q2, q1.q1, q1.q2, eps, h_spec)
    )


def _theta_images_needed(chart: Chart, h_spec: PseudoHamiltonian, grid: Grid2D, eps: float) -> int:
    if chart.kind != POLAR:
        return 0
    _, c2 = h_spec.kinetic_coeffs(grid.q1)
    sigma = math.sqrt(h_spec.hbar * eps * float(np.max(c2)) / h_spec.mass)
    return max(1, int(math.ceil(6.0 * sigma / TWO_PI)))


def stp_matrix(grid: Grid2D, eps: float, h_spec: PseudoHamiltonian, threads: Optional[int] = None) -> np.ndarray:
    """Dense matrix of short-time kernel values over all grid node pairs."""
    q1, q2 = grid.meshes()
    q1f = q1.ravel()
    q2f = q2.ravel()
    n_img = _theta_images_needed(grid.chart, h_spec, grid, eps)
    n = len(q1f)
    out = np.empty((n, n))

    def fill(rows: slice) -> None:
        out[rows] = _stp_values(
            grid.chart,
            q1f[rows, None],
            q2f[rows, None],
            q1f[None, :],
            q2f[None, :],
            eps,
            h_spec,
            n_theta_images=n_img,
        )

    map_in_chunks(fill, n, threads)
    return out


def iterate_kernel(
    config: SliceConfig,
    chart: Chart,
    h_spec: PseudoHamiltonian,
    threads: Optional[int] = None,
) -> KernelGrid:
    """Chapman-Kolmogorov composition of N short-time kernels.

    Grid quadrature composes the dense slice matrix with the measure
    weights; Monte Carlo importance-samples paths from a fixed source using
    the short-time kernel as transition density with a deterministic seed.
    """
    if isinstance(config.quadrature, GridQuadrature):
        return _iterate_grid(config, chart, h_spec, threads)
    return _iterate_monte_carlo(config, chart, h_spec)


def _build_grid(chart: Chart, quad: GridQuadrature) -> Grid2D:
    if chart.kind == POLAR:
        return polar_grid(quad.q1_lo, quad.q1_hi, quad.n_q1, quad.n_q2, r_min=chart.r_min)
    grid = cartesian_grid(quad.q1_lo, quad.q1_hi, quad.n_q1)
    if quad.n_q2 != quad.n_q1:
        x = np.linspace(quad.q1_lo, quad.q1_hi, quad.n_q1)
        y = np.linspace(quad.q1_lo, quad.q1_hi, quad.n_q2)
        grid = Grid2D(chart, x, y)
    return grid


def _iterate_grid(config, chart, h_spec, threads) -> KernelGrid:
    grid = _build_grid(chart, config.quadrature)
    k_slice = stp_matrix(grid, config.eps, h_spec, threads)
    w = grid.quadrature_weights().ravel()
    # K_N = K (W K)^{N-1} = (K W)^N W^{-1}; the power runs by binary doubling
    result = k_slice
    if config.n_slices > 1:
        base = k_slice * w[None, :]
        power = config.n_slices
        acc = None
        while power:
            if power & 1:
                acc = base if acc is None else acc @ base
            power >>= 1
            if power:
                base = base @ base
        result = acc / w[None, :]
    return KernelGrid(
        grid=grid,
        values=result,
        time=config.total_time,
        eps=config.eps,
        n_slices=config.n_slices,
    )


def _iterate_monte_carlo(config, chart, h_spec) -> KernelGrid:
    quad = config.quadrature
    rng = np.random.default_rng(quad.seed)
    eps = config.eps
    m, hbar = h_spec.mass, h_spec.hbar
    n = quad.samples
    q1 = np.full(n, quad.source[0])
    q2 = np.full(n, quad.source[1])
    logw = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    for _ in range(config.n_slices - 1):
        c1, c2 = h_spec.kinetic_coeffs(q1)
        s1 = np.sqrt(hbar * eps * c1 / m)
        s2 = np.sqrt(hbar * eps * c2 / m)
        n1 = rng.standard_normal(n)
        n2 = rng.standard_normal(n)
        q1_new = q1 + s1 * n1
        q2_new = q2 + s2 * n2
        if chart.kind == POLAR:
            bad = q1_new < chart.r_min
            alive &= ~bad
            q1_new = np.where(bad, chart.r_min, q1_new)
        target = _stp_values(chart, q1_new, q2_new, q1, q2, eps, h_spec) * density_array(
            chart, q1_new
        )
        proposal = (
            1.0
            / (2.0 * math.pi * s1 * s2)
            * np.exp(-0.5 * (n1 ** 2 + n2 ** 2))
        )
        logw += np.where(alive, np.log(np.maximum(target, 1e-300)) - np.log(proposal), -np.inf)
        q1, q2 = q1_new, q2_new

    # final factor: closed-form kernel from the last sampled point to each node
    grid_quad = GridQuadrature(
        n_q1=64, n_q2=64, q1_lo=quad.source[0] - 6.0, q1_hi=quad.source[0] + 6.0
    )
    grid = _build_grid(chart, grid_quad)
    g1, g2 = grid.meshes()
    g1f = g1.ravel()
    g2f = g2.ravel()
    weights = np.where(alive, np.exp(logw), 0.0)
    vals = np.empty(len(g1f))
    errs = np.empty(len(g1f))
    n_img = _theta_images_needed(chart, h_spec, grid, eps)
    block = 256
    for start in range(0, len(g1f), block):
        sl = slice(start, min(start + block, len(g1f)))
        kf = _stp_values(
            chart,
            g1f[sl, None],
            g2f[sl, None],
            q1[None, :],
            q2[None, :],
            eps,
            h_spec,
            n_theta_images=n_img,
        )
        contrib = kf * weights[None, :]
        vals[sl] = contrib.mean(axis=1)
        errs[sl] = contrib.std(axis=1) / math.sqrt(n)
    return KernelGrid(
        grid=grid,
        values=vals[:, None],
        time=config.total_time,
        eps=config.eps,
        n_slices=config.n_slices,
        source=Point2(*quad.source),
        mc_stderr=errs[:, None],
    )


def compose(a: KernelGrid, b: KernelGrid) -> KernelGrid:
    """Chapman-Kolmogorov composition of two kernels on the same grid."""
    if a.grid.shape != b.grid.shape:
        raise ValueError("kernels must share a grid")
    w = a.measure_weights()
    return KernelGrid(
        grid=a.grid,
        values=(a.values * w[None, :]) @ b.values,
        time=a.time + b.time,
        eps=a.eps,
        n_slices=a.n_slices + b.n_slices,
        scaled=a.scaled,
        alpha_id=a.alpha_id,
    )


# ---------------------------------------------------------------------------
# Probe integrals against the short-time kernel
# ---------------------------------------------------------------------------


def apply_stp_to_probe(
    chart: Chart,
    h_spec: PseudoHamiltonian,
    q: Point2,
    eps: float,
    probe: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n_sigma: float = 10.0,
    n_points: int = 181,
) -> float:
    """int K_eps(q, q0) f(q0) sqrt(g)(q0) dq0 over a local window.

    The window spans n_sigma Gaussian widths of the slice kernel in each
    coordinate, clipped to the admissible radial domain; the trapezoid rule
    on the smooth Gaussian integrand converges spectrally.
    """
    chart.require_admissible(q)
    m, hbar = h_spec.mass, h_spec.hbar
    c1, c2 = h_spec.kinetic_coeffs(q.q1)
    s1 = math.sqrt(hbar * eps * float(c1) / m)
    s2 = math.sqrt(hbar * eps * float(c2) / m)
    lo1 = q.q1 - n_sigma * s1
    if chart.kind == POLAR:
        lo1 = max(lo1, chart.r_min)
    q1 = np.linspace(lo1, q.q1 + n_sigma * s1, n_points)
    q2 = np.linspace(q.q2 - n_sigma * s2, q.q2 + n_sigma * s2, n_points)
    Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
    kern = _stp_values(chart, q.q1, q.q2, Q1, Q2, eps, h_spec)
    vals = kern * probe(Q1, Q2) * density_array(chart, Q1)
    return float(np.trapezoid(np.trapezoid(vals, q2, axis=1), q1, axis=0))


def stp_action(chart: Chart, h_spec: PseudoHamiltonian, **window) -> Callable:
    """Kernel action adapter for effective-potential extraction."""

    def action(q: Point2, eps: float, probe) -> float:
        return apply_stp_to_probe(chart, h_spec, q, eps, probe, **window)

    return action


@dataclass
class DeltaLimitReport:
    """Probe reproduction and normalization behaviour as eps -> 0."""

    eps_values: list
    probe_errors: dict  # probe label -> list of |I - f|/|f| per eps
    mass_deficits: list  # 1 - int K rho dq0 per eps
    probe_rates: dict  # probe label -> fitted log-log slope
    mass_rate: Optional[float]


def delta_limit_check(
    chart: Chart,
    h_spec: PseudoHamiltonian,
    eps_sequence: Sequence[float],
    probes: Optional[dict] = None,
    point: Point2 = Point2(2.0, 0.7),
) -> DeltaLimitReport:
    """Verify int K_eps(q, q0) f(q0) rho dq0 -> f(q) along a decreasing eps sequence."""
    eps_values = sorted(eps_sequence, reverse=True)
    if probes is None:
        from .grids import GaussianRing

        probes = {
            "ring_l0": GaussianRing(s=0.25, l=0),
            "ring_l1": GaussianRing(s=0.25, l=1),
            "ring_l2": GaussianRing(s=1.0 / 6.0, l=2),
        }
    probe_errors = {label: [] for label in probes}
    mass_deficits = []
    one = lambda a, b: np.ones_like(a)
    for eps in eps_values:
        mass = apply_stp_to_probe(chart, h_spec, point, eps, one)
        mass_deficits.append(1.0 - mass)
        for label, probe in probes.items():
            val = apply_stp_to_probe(chart, h_spec, point, eps, probe)
            ref = float(probe(point.q1, point.q2))
            probe_errors[label].append(abs(val - ref) / max(abs(ref), 1e-300))

    def fitted_rate(errors):
        errs = np.array(errors)
        if np.any(errs <= 0.0):
            return None
        slope = np.polyfit(np.log(eps_values), np.log(errs), 1)[0]
        return float(slope)

    probe_rates = {label: fitted_rate(errs) for label, errs in probe_errors.items()}
    mass_rate = fitted_rate(np.abs(mass_deficits)) if all(
        abs(d) > 0 for d in mass_deficits
    ) else None
    return DeltaLimitReport(
        eps_values=list(eps_values),
        probe_errors=probe_errors,
        mass_deficits=mass_deficits,
        probe_rates=probe_rates,
        mass_rate=mass_rate,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def write_kernel_csv(path, kernel: KernelGrid) -> None:
    """CSV dump with columns r, theta, r0, theta0, value.

    The column names follow the polar chart; for cartesian kernels the
    columns hold (x, y, x0, y0) in the same order.
    """
    q1, q2 = kernel.node_coordinates()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "theta", "r0", "theta0", "value"])
        n_cols = kernel.values.shape[1]
        for i in range(kernel.values.shape[0]):
            for j in range(n_cols):
                if n_cols == 1:
                    src = kernel.source or Point2(math.nan, math.nan)
                    r0, t0 = src.q1, src.q2
                else:
                    r0, t0 = q1[j], q2[j]
                writer.writerow(
                    [repr(float(q1[i])), repr(float(q2[i])), repr(float(r0)), repr(float(t0)), repr(float(kernel.values[i, j]))]
                )


_HEADER = struct.Struct("<qqdqqqq")  # chart id, N, eps, n1, n2, scaled, alpha id


def write_kernel_binary(path, kernel: KernelGrid) -> None:
    """Compact dump: little-endian 64-bit header, axes, then row-major floats."""
    grid = kernel.grid
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _CHART_IDS[grid.chart.kind],
                kernel.n_slices,
                kernel.eps,
                grid.shape[0],
                grid.shape[1],
                int(kernel.scaled),
                _ALPHA_IDS[kernel.alpha_id],
            )
        )
        fh.write(np.asarray(grid.q1, dtype="<f8").tobytes())
        fh.write(np.asarray(grid.q2, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(kernel.values, dtype="<f8").tobytes())


def read_kernel_binary(path) -> KernelGrid:
    from .geometry import chart_from_id

    with open(path, "rb") as fh:
        chart_id, n_slices, eps, n1, n2, scaled, alpha_id = _HEADER.unpack(
            fh.read(_HEADER.size)
        )
        q1 = np.frombuffer(fh.read(8 * n1), dtype="<f8").copy()
        q2 = np.frombuffer(fh.read(8 * n2), dtype="<f8").copy()
        payload = np.frombuffer(fh.read(), dtype="<f8").copy()
    chart = chart_from_id(_CHART_FROM_ID[chart_id])
    grid = Grid2D(chart, q1, q2)
    n_nodes = n1 * n2
    values = payload.reshape(n_nodes, -1)
    return KernelGrid(
        grid=grid,
        values=values,
        time=n_slices * eps,
        eps=eps,
        n_slices=n_slices,
        scaled=bool(scaled),
        alpha_id=_ALPHA_FROM_ID[alpha_id],
    )
