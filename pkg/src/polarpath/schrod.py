"""Finite-N replica of the slice-sum derivation of the Schroedinger equation.

Expanding the N-slice scaled kernel to first order in time produces one
functional X_k per slice.  After the momentum integrations collapse all but
the k-th slice, each X_k acts on a wavefunction through closed-form moments
of the auxiliary integral

    int_0^infty beta^n exp(-2 beta r N) dbeta = n! / (2 r N)^{n+1}

and polynomial coefficients in (2k+1).  Summing over k gives an effective
generator G_N whose angular channel equals (1/r^2) psi_thth exactly for
every N, and whose radial channels converge to the Laplace-Beltrami form
with a pure zeroth-derivative defect psi / (2 N^2 r^2).  Substituting the
asymptotic value 4 N^3 / 3 for the sum of squared odd integers removes that
defect identically, which is precisely the approximation the derivation
makes on its way to the continuum equation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Point2
from .grids import Grid2D, Wavefunction
from .operators import STENCIL_REACH, diff1, diff2

__all__ = [
    "sum_odd",
    "sum_odd_squares",
    "sum_odd_squares_asymptotic",
    "beta_moment",
    "f_k",
    "xk_apply",
    "generator_coefficients",
    "EffectiveGeneratorReport",
    "effective_generator",
    "ConvergenceStudy",
    "effective_generator_convergence",
    "report_to_json",
    "write_convergence_csv",
]

MAX_BETA_MOMENT_ORDER = 20


def sum_odd(N: int) -> int:
    """sum_{k=0}^{N-1} (2k+1) = N^2, exact integer arithmetic."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return N * N


def sum_odd_squares(N: int) -> int:
    """sum_{k=0}^{N-1} (2k+1)^2 = N (2N-1) (2N+1) / 3, exact."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return N * (2 * N - 1) * (2 * N + 1) // 3


def sum_odd_squares_asymptotic(N: int) -> float:
    """The large-N value 4 N^3 / 3; exceeds the exact sum by exactly N / 3."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return 4.0 * N ** 3 / 3.0


def beta_moment(n: int, r: float, N: int) -> float:
    """int_0^infty beta^n exp(-2 beta r N) dbeta = n! / (2 r N)^{n+1}."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > MAX_BETA_MOMENT_ORDER:
        raise ValueError(f"n = {n} exceeds the supported order {MAX_BETA_MOMENT_ORDER}")
    if r <= 0.0:
        raise ValueError("r must be positive")
    if N < 1:
        raise ValueError("N must be >= 1")
    return math.factorial(n) / (2.0 * r * N) ** (n + 1)


def f_k(k: int, N: int, r: float, r0: float) -> float:
    """The collapsed slice-sum factor (2N-1-2k) r + (2k+1) r0."""
    if not 0 <= k <= N - 1:
        raise ValueError("k must satisfy 0 <= k <= N-1")
    return (2 * N - 1 - 2 * k) * r + (2 * k + 1) * r0


@dataclass
class _GridDerivatives:
    """Cached 4th-order derivative arrays of a sampled wavefunction."""

    psi: np.ndarray
    d_r: np.ndarray
    d_rr: np.ndarray
    d_thth: np.ndarray

    @classmethod
    def from_wavefunction(cls, psi: Wavefunction) -> "_GridDerivatives":
        grid = psi.grid
        v = psi.values
        periodic = grid.periodic_q2
        return cls(
            psi=v,
            d_r=diff1(v, grid.dq1, 0, False),
            d_rr=diff2(v, grid.dq1, 0, False),
            d_thth=diff2(v, grid.dq2, 1, periodic),
        )


_DERIV_CACHE: dict[int, tuple[int, _GridDerivatives]] = {}


def _derivatives(psi: Wavefunction) -> _GridDerivatives:
    key = id(psi)
    version = id(psi.values)
    cached = _DERIV_CACHE.get(key)
    if cached is not None and cached[0] == version:
        return cached[1]
    derivs = _GridDerivatives.from_wavefunction(psi)
    _DERIV_CACHE[key] = (version, derivs)
    return derivs


def _node_for_point(psi: Wavefunction, eval_point: Point2) -> tuple[int, int]:
    grid = psi.grid
    i, j = grid.node_index(eval_point.q1, eval_point.q2)
    if i < STENCIL_REACH or i >= grid.shape[0] - STENCIL_REACH:
        raise ValueError(
            f"evaluation point r={eval_point.q1} is within {STENCIL_REACH} cells of the radial boundary"
        )
    return i, j


def _xk_weights(k, N: int, r, m: float, hbar: float):
    """Per-slice weights of (psi, psi_r, psi_rr, psi_thth) in the X_k action.

    k may be an integer or an integer array; r a scalar or array.
    """
    k = np.asarray(k)
    odd = 2 * k + 1
    m1 = 1.0 / (2.0 * r * N) ** 2
    m2 = 2.0 / (2.0 * r * N) ** 3
    m3 = 6.0 / (2.0 * r * N) ** 4
    front = -(hbar * hbar / (2.0 * m)) * 2.0 * N
    w_psi = front * (2.0 * m1 - 6.0 * r * odd * m2 + 2.0 * r ** 2 * odd ** 2 * m3)
    w_r = front * (6.0 * r * m1 - 4.0 * r ** 2 * odd * m2)
    # the second-derivative and angular weights carry no k dependence; they
    # must still broadcast over the k axis for per-slice summation
    shape = np.broadcast_shapes(np.shape(k), np.shape(np.asarray(r)))
    w_rr = np.broadcast_to(np.asarray(front * (2.0 * r ** 2 * m1)), shape)
    w_thth = np.broadcast_to(np.asarray(front * (2.0 * m1)), shape)
    if w_psi.shape == ():
        return float(w_psi), float(w_r), float(w_rr), float(w_thth)
    return w_psi, w_r, w_rr, w_thth


def xk_apply(
    k: int,
    N: int,
    psi: Wavefunction,
    eval_point: Point2,
    m: float = 1.0,
    hbar: float = 1.0,
) -> complex:
    """Contribution of the k-th slice functional to i hbar dpsi/dt at a node.

    The angular term carries the beta moment at the collapsed factor
    f_k(k, N, r, r0) evaluated at r0 = r (equal to 2 N r for every k); the
    radial term comes from the second-derivative expansion of the collapsed
    integrand, with all beta integrals reduced to beta_moment values.
    Derivatives of psi are 4th-order finite differences on its grid.
    """
    if not 0 <= k <= N - 1:
        raise ValueError("k must satisfy 0 <= k <= N-1")
    i, j = _node_for_point(psi, eval_point)
    d = _derivatives(psi)
    r = float(psi.grid.q1[i])
    w_psi, w_r, w_rr, w_thth = _xk_weights(k, N, r, m, hbar)
    val = (
        w_psi * d.psi[i, j]
        + w_r * d.d_r[i, j]
        + w_rr * d.d_rr[i, j]
        + w_thth * d.d_thth[i, j]
    )
    return complex(val)


def generator_coefficients(N: int, r, variant: str = "exact", m: float = 1.0, hbar: float = 1.0):
    """Closed-form k-summed weights of (psi, psi_r, psi_rr, psi_thth) in G_N.

    variant "exact" uses the exact odd-square sum; "paper_asymptotic"
    substitutes 4 N^3 / 3, which cancels the zeroth-derivative channel for
    every N.  Both reduce the slice sums with the beta-moment closed forms.
    """
    if variant not in ("exact", "paper_asymptotic"):
        raise ValueError(f"unknown variant {variant!r}")
    r = np.asarray(r, dtype=float)
    s0 = float(N)
    s1 = float(sum_odd(N))
    s2 = float(sum_odd_squares(N)) if variant == "exact" else sum_odd_squares_asymptotic(N)
    m1 = 1.0 / (2.0 * r * N) ** 2
    m2 = 2.0 / (2.0 * r * N) ** 3
    m3 = 6.0 / (2.0 * r * N) ** 4
    front = -(hbar * hbar / (2.0 * m)) * 2.0 * N
    w_psi = front * (2.0 * m1 * s0 - 6.0 * r * m2 * s1 + 2.0 * r ** 2 * m3 * s2)
    w_r = front * (6.0 * r * m1 * s0 - 4.0 * r ** 2 * m2 * s1)
    w_rr = front * (2.0 * r ** 2 * m1 * s0)
    w_thth = front * (2.0 * m1 * s0)
    return w_psi, w_r, w_rr, w_thth


@dataclass
class EffectiveGeneratorReport:
    """Finite-N generator applied on a grid, with residuals against the target.

    The target is -(hbar^2/2m) [psi_rr + psi_r/r + psi_thth/r^2] computed
    with the same stencils, so the residual isolates the finite-N defect.
    residual_l2 and residual_max are norms over the interior relative to the
    target's L2 norm / max.  psi_channel_weight is the coefficient of psi in
    G_N at r = 2 (zero for the asymptotic variant).
    """

    N: int
    variant: str
    applied: np.ndarray
    target: np.ndarray
    residual_l2: float
    residual_max: float
    psi_channel_weight: float
    channels: dict
    analytic_target_l2_error: Optional[float] = None


def effective_generator(
    N: int,
    psi: Wavefunction,
    variant: str = "exact",
    method: str = "closed",
    m: float = 1.0,
    hbar: float = 1.0,
    analytic_target: Optional[np.ndarray] = None,
) -> EffectiveGeneratorReport:
    """Apply the finite-N effective generator to psi over its whole grid.

    method "closed" uses the k-summed closed forms; "per_k" accumulates the
    N slice contributions term by term (identical result, used as a
    cross-check and only sensible for moderate N).
    """
    if psi.chart.kind != "polar2d":
        raise ValueError("the effective generator acts on polar wavefunctions")
    grid = psi.grid
    d = _derivatives(psi)
    r = grid.q1[:, None]
    if method == "closed":
        w_psi, w_r, w_rr, w_thth = generator_coefficients(N, r, variant, m, hbar)
    elif method == "per_k":
        if variant != "exact":
            raise ValueError("per-k summation implements the exact variant only")
        ks = np.arange(N)[None, None, :]
        w = _xk_weights(ks, N, r[:, :, None], m, hbar)
        w_psi, w_r, w_rr, w_thth = (x.sum(axis=2) for x in w)
    else:
        raise ValueError(f"unknown method {method!r}")

    applied = w_psi * d.psi + w_r * d.d_r + w_rr * d.d_rr + w_thth * d.d_thth
    front = -(hbar * hbar / (2.0 * m))
    target = front * (d.d_rr + d.d_r / r + d.d_thth / r ** 2)

    interior = slice(STENCIL_REACH, -STENCIL_REACH)
    res = applied[interior] - target[interior]
    tgt = target[interior]
    residual_l2 = float(np.linalg.norm(res) / np.linalg.norm(tgt))
    residual_max = float(np.max(np.abs(res)) / np.max(np.abs(tgt)))
    channels = {
        "thth": front / np.ravel(r)[len(r) // 2] ** 2,
        "psi_weight_at_r2": float(
            np.ravel(generator_coefficients(N, 2.0, variant, m, hbar)[0])[0]
        ),
    }
    analytic_err = None
    if analytic_target is not None:
        diff = applied[interior] - analytic_target[interior]
        analytic_err = float(np.linalg.norm(diff) / np.linalg.norm(analytic_target[interior]))
    return EffectiveGeneratorReport(
        N=N,
        variant=variant,
        applied=applied,
        target=target,
        residual_l2=residual_l2,
        residual_max=residual_max,
        psi_channel_weight=channels["psi_weight_at_r2"],
        channels=channels,
        analytic_target_l2_error=analytic_err,
    )


@dataclass
class ConvergenceStudy:
    N_values: list
    residuals_l2: list
    fitted_order: float
    variant: str


def effective_generator_convergence(
    N_values: Sequence[int],
    psi: Wavefunction,
    variant: str = "exact",
    m: float = 1.0,
    hbar: float = 1.0,
) -> ConvergenceStudy:
    """Residual-vs-N study; the fitted order is the negated log-log slope."""
    residuals = [
        effective_generator(N, psi, variant=variant, m=m, hbar=hbar).residual_l2
        for N in N_values
    ]
    slope = np.polyfit(np.log(np.asarray(N_values, dtype=float)), np.log(residuals), 1)[0]
    return ConvergenceStudy(
        N_values=list(N_values),
        residuals_l2=residuals,
        fitted_order=float(-slope),
        variant=variant,
    )


def report_to_json(report: EffectiveGeneratorReport) -> str:
    payload = {
        "N": report.N,
        "variant": report.variant,
        "residual_L2": report.residual_l2,
        "residual_max": report.residual_max,
        "psi_channel_weight": report.psi_channel_weight,
        "channels": {k: float(v) for k, v in report.channels.items()},
    }
    if report.analytic_target_l2_error is not None:
        payload["analytic_target_L2_error"] = report.analytic_target_l2_error
    return json.dumps(payload, indent=2, sort_keys=True)


def write_convergence_csv(path, study: ConvergenceStudy) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "residual", "order_estimate"])
        for i, (N, res) in enumerate(zip(study.N_values, study.residuals_l2)):
            if i == 0:
                est = ""
            else:
                est = -(
                    math.log(res / study.residuals_l2[i - 1])
                    / math.log(N / study.N_values[i - 1])
                )
                est = f"{est:.6f}"
            writer.writerow([N, repr(res), est])
