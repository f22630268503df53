"""Patch-reconstruction discontinuous Galerkin for the 2D biharmonic equation.

One unknown per cell: a per-cell least-squares fit over a patch of
neighbouring cell values lifts the cell averages to a piecewise polynomial
of degree m, which is then fed into a symmetric interior-penalty form.
"""

from .assembly import DiscreteSystem, PenaltyConfig, assemble, coercivity_probe, symmetry_defect
from .mesh import (MeshError, MeshParseError, PolyMesh, TopologyError, generate_lshape_tri,
                   generate_perturbed_tri, generate_structured_mixed, generate_structured_tri,
                   import_msh, load_mesh, read_native, write_native)
from .patch import Patch, build_patches, patch_size_for_degree
from .problems import ManufacturedCase, get_case
from .recon import ReconOperator, UniquenessViolation, build_full_dg, build_recon, estimate_lambda
from .solve import ErrorReport, FactorizationError, SolveReport, compute_errors, convergence_rates, solve

__version__ = "0.1.0"

__all__ = [
    "DiscreteSystem", "PenaltyConfig", "assemble", "coercivity_probe", "symmetry_defect",
    "MeshError", "MeshParseError", "PolyMesh", "TopologyError", "generate_lshape_tri",
    "generate_perturbed_tri", "generate_structured_mixed", "generate_structured_tri",
    "import_msh", "load_mesh", "read_native", "write_native",
    "Patch", "build_patches", "patch_size_for_degree",
    "ManufacturedCase", "get_case",
    "ReconOperator", "UniquenessViolation", "build_full_dg", "build_recon", "estimate_lambda",
    "ErrorReport", "FactorizationError", "SolveReport", "compute_errors", "convergence_rates", "solve",
]
