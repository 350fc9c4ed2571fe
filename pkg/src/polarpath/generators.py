"""Classical Hamiltonians, the pseudo-Hamiltonian and first-order slice generators.

The evolution over one pseudo-time slice is generated by the mixed
first-order generators S_++ and S_--, which pair a coordinate endpoint with
a midpoint momentum.  Their sum gives the slice action

    S_j = P dr + p dtheta - (eps/2) (h_next + h_prev)

which is linear in the coordinate differences and quadratic in the momenta
for every Hamiltonian in scope, so all momentum integrals are Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import Chart, Point2, ScalingFunction, metric_inverse_diag


@dataclass(frozen=True)
class PhasePoint:
    q: Point2
    P: float  # momentum conjugate to q1
    p: float  # momentum conjugate to q2


@dataclass(frozen=True)
class Hamiltonian:
    """H = g^ij p_i p_j / (2m) + V(q); V defaults to zero."""

    chart: Chart
    mass: float = 1.0
    hbar: float = 1.0
    potential: Optional[Callable[[Point2], float]] = None

    def __post_init__(self):
        if self.mass <= 0.0 or self.hbar <= 0.0:
            raise ValueError("mass and hbar must be positive")

    def potential_value(self, q: Point2) -> float:
        return 0.0 if self.potential is None else self.potential(q)

    def __call__(self, q: Point2, P: float, p: float) -> float:
        self.chart.require_admissible(q)
        g11, g22 = metric_inverse_diag(self.chart, q.q1)
        return (g11 * P * P + g22 * p * p) / (2.0 * self.mass) + self.potential_value(q)


@dataclass(frozen=True)
class PseudoHamiltonian:
    """h(q, P, p; E) = alpha(q) * (H(q, P, p) - E).

    With alpha == 1 and E == 0 this is the plain Hamiltonian, and every
    kernel built from it coincides with the unscaled one.
    """

    base: Hamiltonian
    alpha: Optional[ScalingFunction] = None
    energy: float = 0.0

    def __post_init__(self):
        if self.alpha is None:
            from .geometry import unit_scaling

            object.__setattr__(self, "alpha", unit_scaling(self.base.chart))

    @property
    def chart(self) -> Chart:
        return self.base.chart

    @property
    def mass(self) -> float:
        return self.base.mass

    @property
    def hbar(self) -> float:
        return self.base.hbar

    def __call__(self, q: Point2, P: float, p: float) -> float:
        return self.alpha(q) * (self.base(q, P, p) - self.energy)

    def kinetic_coeffs(self, q1):
        """Coefficients (k1, k2) of P^2/2m and p^2/2m in h; vectorized in q1."""
        g11, g22 = metric_inverse_diag(self.chart, q1)
        a = self.alpha.values(q1)
        return a * g11, a * g22

    def potential_shift(self, q: Point2) -> float:
        """alpha(q) * (V(q) - E), the momentum-independent part of h."""
        return self.alpha(q) * (self.base.potential_value(q) - self.energy)


def eval_pseudo_hamiltonian(r: float, P: float, p: float, E: float, m: float = 1.0) -> float:
    """Polar free-particle pseudo-Hamiltonian r P^2/2m + p^2/(2 m r) - E r."""
    if r <= 0.0:
        raise ValueError("r must be positive")
    if m <= 0.0:
        raise ValueError("m must be positive")
    return r * P * P / (2.0 * m) + p * p / (2.0 * m * r) - E * r


def generators_first_order(
    q2: Point2,
    q1: Point2,
    P: float,
    p: float,
    eps: float,
    h: PseudoHamiltonian,
) -> tuple[float, float]:
    """First-order mixed generators (S_++, S_--) for one slice.

    S_++ generates evolution from the midpoint momentum to the coordinate
    endpoint q2; S_-- from the coordinate endpoint q1 to the midpoint
    momentum.  Their sum is the slice action.
    """
    s_pp = P * q2.q1 + p * q2.q2 - 0.5 * eps * h(q2, P, p)
    s_mm = -P * q1.q1 - p * q1.q2 - 0.5 * eps * h(q1, P, p)
    return s_pp, s_mm


def slice_action(
    q_next: Point2,
    q_prev: Point2,
    P: float,
    p: float,
    eps_eff: float,
    E: float = 0.0,
    h: Optional[PseudoHamiltonian] = None,
    m: float = 1.0,
) -> float:
    """Slice action P dr + p dtheta - (eps_eff/2)(h_next + h_prev).

    The symmetric endpoint sum (h_next + h_prev) is used throughout; in the
    reduced polar form the half-step eps_eff/2 becomes t/F and the energy
    terms are absent.  Defaults to the polar free-particle pseudo-Hamiltonian
    when no Hamiltonian is supplied.
    """
    if eps_eff <= 0.0:
        raise ValueError("eps_eff must be positive")
    if h is None:
        h_next = eval_pseudo_hamiltonian(q_next.q1, P, p, E, m)
        h_prev = eval_pseudo_hamiltonian(q_prev.q1, P, p, E, m)
    else:
        h_next = h(q_next, P, p)
        h_prev = h(q_prev, P, p)
    dq1 = q_next.q1 - q_prev.q1
    dq2 = q_next.q2 - q_prev.q2
    return P * dq1 + p * dq2 - 0.5 * eps_eff * (h_next + h_prev)


def _mixed_hessian(f: Callable[[float, float], float], x: float, y: float, hx: float, hy: float) -> float:
    return (
        f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) + f(x - hx, y - hy)
    ) / (4.0 * hx * hy)


def d_plusplus_check(
    eps: float,
    q: Point2 = Point2(1.3, 0.4),
    P: float = 0.7,
    p: float = -0.5,
    E: float = 0.3,
    m: float = 1.0,
    fd_step: float = 1e-3,
) -> float:
    """Product of the D_++ and D_-- generator determinants at one slice.

    Both Hessians are computed by centered finite differences of the S_++
    and S_-- evaluators.  The product enters the short-time propagator as
    sqrt(D_++ D_--) and equals 1 + O(eps^2); the deviation is quadratic in
    the midpoint momentum.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    from .geometry import default_scaling, polar_chart

    chart = polar_chart()
    # alpha = sqrt(g) matches the polar pseudo-Hamiltonian of the slicing
    h = PseudoHamiltonian(Hamiltonian(chart, mass=m), default_scaling(chart), E)

    def s_pp(r2, th2, Pv, pv):
        return generators_first_order(Point2(r2, th2), q, Pv, pv, eps, h)[0]

    def s_mm(r1, th1, Pv, pv):
        return generators_first_order(q, Point2(r1, th1), Pv, pv, eps, h)[1]

    def hessian(gen) -> np.ndarray:
        out = np.empty((2, 2))
        coords = (q.q1, q.q2)
        moms = (P, p)
        for i in range(2):
            for j in range(2):
                def f(x, y, i=i, j=j):
                    cs = list(coords)
                    ms = list(moms)
                    cs[i] = x
                    ms[j] = y
                    return gen(cs[0], cs[1], ms[0], ms[1])

                out[i, j] = _mixed_hessian(f, coords[i], moms[j], fd_step, fd_step)
        return out

    d_pp = float(np.linalg.det(hessian(s_pp)))
    d_mm = float(np.linalg.det(hessian(s_mm)))
    return d_pp * d_mm
