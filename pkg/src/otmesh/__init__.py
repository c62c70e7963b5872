"""Optimally transported meshes: exact maps, a Monge-Ampere mesh solver and mesh-quality diagnostics."""
from .analytic_linear import LinearDensity, LinearMap, SechSumDensity, orthogonal_shocks, single_shock
from .analytic_radial import RadialDensity, RadialMap, blowup, ring
from .density import DensityField
from .errors import (
    CFLError, ConvergenceError, ConvexityError, DegenerateElementError, DensityError, OTMeshError,
    TangledMeshError,
)
from .geometry import Grid2D, MeshMapping, QualityReport, quality_report
from .ma_solver import PotentialField, SolverConfig, solve_ma

__version__ = "0.1.0"

__all__ = [
    "CFLError", "ConvergenceError", "ConvexityError", "DegenerateElementError", "DensityError", "DensityField",
    "Grid2D", "LinearDensity", "LinearMap", "MeshMapping", "OTMeshError", "PotentialField", "QualityReport",
    "RadialDensity", "RadialMap", "SechSumDensity", "SolverConfig", "TangledMeshError", "blowup",
    "orthogonal_shocks", "quality_report", "ring", "single_shock", "solve_ma",
]
