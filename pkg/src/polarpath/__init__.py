"""Hamiltonian path-integral kernels with local time scaling in polar coordinates.

The package quantifies how the choice of time-scaling function controls the
effective Hamiltonian of a sliced phase-space path integral: with the
sqrt(g) scaling the Euclidean kernel obeys the Laplace-Beltrami evolution
equation with no 1/r^2 counterterm, while the unscaled construction carries
a measurable spurious potential hbar^2 / (8 m r^2).
"""

from .geometry import (
    CARTESIAN,
    POLAR,
    Chart,
    Point2,
    ScalingFunction,
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
from .generators import (
    Hamiltonian,
    PhasePoint,
    PseudoHamiltonian,
    d_plusplus_check,
    eval_pseudo_hamiltonian,
    generators_first_order,
    slice_action,
)
from .grids import (
    GaussianRing,
    Grid2D,
    Wavefunction,
    cartesian_grid,
    default_rings,
    polar_grid,
    sample,
)
from .kernel import (
    DeltaLimitReport,
    GridQuadrature,
    KernelGrid,
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
from .operators import (
    EffectivePotentialFit,
    apply_canonical_polar,
    apply_h_rho_alpha,
    apply_laplace_beltrami,
    extract_effective_potential,
    inner_product,
)
from .oracle import (
    ExactKernelSpec,
    bessel_series_kernel,
    free_cover_kernel,
    free_polar_kernel,
    heat_kernel_cartesian,
    image_sum_kernel,
    standard_point_battery,
)
from .scaling import (
    ConsistencyReport,
    ReducedSlicing,
    apply_scaled_stp_to_probe,
    h_rho_alpha_consistency,
    reduce_pseudo_energy,
    reduced_probe_action,
    scaled_kernel_euclidean,
    scaled_kernel_grid,
    scaled_kernel_mc,
    scaled_kernel_quadrature,
    scaled_ring_action,
    scaled_short_time_kernel,
)
from .schrod import (
    ConvergenceStudy,
    EffectiveGeneratorReport,
    beta_moment,
    effective_generator,
    effective_generator_convergence,
    f_k,
    sum_odd,
    sum_odd_squares,
    sum_odd_squares_asymptotic,
    xk_apply,
)

__version__ = "0.1.0"
