"""Steady periodic water waves over a flat bed.

Solves the height-function form of the governing equations on the fixed
transformed rectangle, reconstructs the flow field, and verifies the
qualitative properties of the vertical velocity (sign, monotonicity versus
streamline curvature, inflection parity, maximum location, displacement
decay) for irrotational, constant, and monotone vorticity.
"""

from .analysis import (
    AnalysisReport,
    PropertyVerdict,
    find_inflection_points,
    first_dirichlet_eigenvalue,
    run_battery,
)
from .fields import (
    Streamline,
    VelocityField,
    extract_streamline,
    linear_wave_oracle,
    velocity_from_height,
)
from .laminar import LaminarProfile, bifurcation_head, solve_laminar
from .solver import (
    AmplitudePin,
    ContinuationTrace,
    Grid,
    HeadPin,
    HeightField,
    PhysicalParams,
    assemble_jacobian,
    assemble_residual,
    continue_in_amplitude,
    newton_solve,
    unit_depth_flux,
)
from .vorticity import GammaIntegral, VorticitySpec, evaluate_gamma, gamma_integral

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "AmplitudePin",
    "ContinuationTrace",
    "GammaIntegral",
    "Grid",
    "HeadPin",
    "HeightField",
    "LaminarProfile",
    "PhysicalParams",
    "PropertyVerdict",
    "Streamline",
    "VelocityField",
    "VorticitySpec",
    "assemble_jacobian",
    "assemble_residual",
    "bifurcation_head",
    "continue_in_amplitude",
    "evaluate_gamma",
    "extract_streamline",
    "find_inflection_points",
    "first_dirichlet_eigenvalue",
    "gamma_integral",
    "linear_wave_oracle",
    "newton_solve",
    "run_battery",
    "solve_laminar",
    "unit_depth_flux",
    "velocity_from_height",
]
