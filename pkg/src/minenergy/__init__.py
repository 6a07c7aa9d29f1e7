"""Discrete weighted minimal energy problems on finite point sets.

Kernel matrices (Riesz, logarithmic or explicit) are certified positive
definite; capacities, balayage and weighted equilibrium measures are computed
as convex quadratic programs with checkable optimality certificates.
"""

__version__ = "0.1.0"

from .balayage import BalayageReport, domination_screen, sweep, sweep_min_norm, verify_balayage_props
from .equilibrium import CapacityReport, capacitary_direct, capacity_monotone_check, frostman_screen, robin_capacity
from .exhaustion import ExhaustionReport, mass_deficiency_experiment, run_exhaustion, thinness_series
from .gauss import (
    GaussReport,
    equilibrium_constant,
    minimality_battery,
    representation_solution,
    solve_gauss,
    verify_characterization,
)
from .geometry import (
    Ball,
    Circle,
    ExhaustionChain,
    IndexSet,
    PointSet,
    RotationBody,
    Sphere,
    annuli_partition,
    exhaustion_chain,
    sample_shape,
)
from .kernels import KernelMatrix, KernelSpec, PositiveDefinitenessError, assemble_matrix, surface_cell_c_reg
from .measures import DiscreteMeasure, ExternalField, energy, gauss_functional, potential
from .qp import active_set_oracle, solve_cone_projection, solve_obstacle_qp, solve_simplex_qp

__all__ = [
    "BalayageReport", "domination_screen", "sweep", "sweep_min_norm", "verify_balayage_props",
    "CapacityReport", "capacitary_direct", "capacity_monotone_check", "frostman_screen", "robin_capacity",
    "ExhaustionReport", "mass_deficiency_experiment", "run_exhaustion", "thinness_series",
    "GaussReport", "equilibrium_constant", "minimality_battery", "representation_solution",
    "solve_gauss", "verify_characterization",
    "Ball", "Circle", "ExhaustionChain", "IndexSet", "PointSet", "RotationBody", "Sphere",
    "annuli_partition", "exhaustion_chain", "sample_shape",
    "KernelMatrix", "KernelSpec", "PositiveDefinitenessError", "assemble_matrix", "surface_cell_c_reg",
    "DiscreteMeasure", "ExternalField", "energy", "gauss_functional", "potential",
    "active_set_oracle", "solve_cone_projection", "solve_obstacle_qp", "solve_simplex_qp",
]
