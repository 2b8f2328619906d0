"""Stabilization-free polygonal solver for 2D diffusion with a residual
a posteriori error estimator."""

from .assembly import DofMap, ElementCache, LinearSystem, assemble, solve
from .estimator import (
    EstimatorReport,
    data_oscillation,
    edge_jump,
    element_residual,
    estimate,
    gradient_field_coeffs,
)
from .harness import ConvergenceRow, RunConfig, emit_csv, emit_svg, \
    run_convergence
from .mesh import (
    MeshQualityReport,
    Patch,
    PolyMesh,
    build_patches,
    generate_distorted_cartesian,
    generate_star_concave,
    generate_voronoi_lloyd,
    load_mesh,
    quality_report,
    refine_uniform,
    save_mesh,
)
from .polybasis import (
    LocalElement,
    QuadratureRule,
    ScaledMonomialBasis,
    VectorPolySpace,
    gram_matrix,
    integrate_monomials,
    polygon_rule,
    select_enlargement,
)
from .problems import PROBLEM_NAMES, ProblemSpec, get_problem
from .projectors import (
    ElementDofs,
    ElementVerificationError,
    LocalProjectors,
    full_moment_matrix,
    gradient_projection_matrix,
    h1_projection_matrix,
    interpolate,
    interpolate_poly,
    verify_coercivity,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
