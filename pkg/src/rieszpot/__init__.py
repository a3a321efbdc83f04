"""Numerical Riesz potential theory on discretized measures.

Energies (standard, weak, Green, Fourier-side), balayage, capacities,
equilibrium and condenser measures, and a Wiener-type thinness classifier,
all on signed atomic measures in R^n with a shared shell-smoothing
convention. Desk scale: dense linear algebra, deterministic meshes.
"""

from .geometry import (
    DomainSpec,
    PointCloud,
    ProfileSpec,
    discretize_ball,
    discretize_sphere,
    separation,
    shell_decompose,
)
from .measures import (
    DiscreteMeasure,
    canonical_suite,
    coalesce,
    jordan_decompose,
    mass_report,
    measure_from_cloud,
    restrict,
)
from .kernels import (
    KernelSpec,
    composition_constant,
    green_kernel,
    kernel_eval,
    kernel_matrix,
    potential,
    self_energy_constant,
)
from .balayage import (
    BalayageResult,
    balayage_dirac_analytic,
    balayage_project,
    balayage_signed,
    mass_preservation_check,
)
from .energies import (
    GridSpec,
    deny_schwartz_energy,
    green_energy,
    identity_residuals,
    standard_energy,
    weak_energy,
    weak_inner_product,
)
from .capacity import (
    CapacitaryResult,
    GreenKernelHandle,
    ThinnessVerdict,
    capacitary_measure,
    green_equilibrium_measure,
    inner_capacity_exhaustion,
    thinness_classify,
)
from .condenser import (
    Condenser,
    CondenserSolution,
    minimizing_sequence_diagnostics,
    potential_truncation,
    solvability_probe,
    solve_standard_problem,
    solve_weak_problem,
    verify_condenser_measure,
)
from .oracles import (
    OracleRecord,
    oracle_ball_capacity,
    oracle_kelvin_green,
    oracle_poisson_mass,
    oracle_spherical_condenser,
    read_golden,
    write_golden,
)

__version__ = "0.1.0"
