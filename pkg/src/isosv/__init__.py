"""Divergence-free, pressure-robust isoparametric Scott-Vogelius elements for
Stokes flow on curved domains (unit disk)."""

from .analysis import (
    ErrorRecord,
    ManufacturedSolution,
    SourceMode,
    StudyConfig,
    compute_errors,
    estimate_inf_sup,
    exact_solution,
    run_convergence_study,
    solve_level,
)
from .assembly import NodalInterpolatedSource, SaddleSystem, assemble_load, assemble_stokes
from .errors import (
    ConfigurationError,
    DegenerateCellError,
    DomainError,
    GeometryError,
    InversionError,
    IsoSVError,
    MeshGenerationError,
    SolverError,
)
from .geometry import AffineMesh, DiskChart, GeoMap, build_cell_map, build_cell_maps, generate_disk_mesh, invert_map, map_eval
from .robust import commuting_mismatch, local_sigma_basis, local_w_basis, pi_sigma, pi_w
from .solver import Factorization, Solution, solve_saddle
from .spaces import VariantTag, build_dof_map, cell_maps_for, evaluate_pressure, evaluate_velocity

__version__ = "0.1.0"
