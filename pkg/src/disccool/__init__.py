"""Upper and lower bounds on heat transport by incompressible flows in the unit disc."""

from .advdiff import DualityReport, SteadySolution, cooling_value, duality_check, solve_steady
from .bounds import BoundReport, decompose_residual, lower_bound_certify, upper_bound
from .config import RunConfig, load_config
from .disc_field import PolarGrid, SpectralScalar, VectorFieldPolar, make_grid
from .flows import (
    BranchingPlan,
    FlowDesign,
    ResolutionError,
    branching_flow,
    branching_plan,
    energy_roll_design,
    energy_roll_plan,
    roll_flow,
    zero_flow,
)
from .poisson import NumericalError, hminus1_energy, inv_laplacian_dirichlet, qform
from .render import count_cells, render_streamlines
from .sources import Source, make_source, parse_source
from .sweep import ScalingFit, SweepTable, fit_scaling, run_sweep

__all__ = [
    "BoundReport",
    "BranchingPlan",
    "DualityReport",
    "FlowDesign",
    "NumericalError",
    "PolarGrid",
    "ResolutionError",
    "RunConfig",
    "ScalingFit",
    "Source",
    "SpectralScalar",
    "SteadySolution",
    "SweepTable",
    "VectorFieldPolar",
    "branching_flow",
    "branching_plan",
    "cooling_value",
    "count_cells",
    "decompose_residual",
    "duality_check",
    "energy_roll_design",
    "energy_roll_plan",
    "fit_scaling",
    "hminus1_energy",
    "inv_laplacian_dirichlet",
    "load_config",
    "lower_bound_certify",
    "make_grid",
    "make_source",
    "parse_source",
    "qform",
    "render_streamlines",
    "roll_flow",
    "run_sweep",
    "solve_steady",
    "upper_bound",
    "zero_flow",
]
