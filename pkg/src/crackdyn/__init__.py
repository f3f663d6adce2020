"""Finite-element dynamics of linearly viscoelastic bodies with a
prescribed growing crack.

The package solves the wave and Maxwell-type viscoelastic systems on
1D/2D domains whose crack grows along a fixed polyline, with the
memory integral of an exponential kernel either folded into the time
march or resolved by iterating a solution map.  Experiment drivers
measure the map's contraction factor, probe uniqueness, and follow
solutions along convergent sequences of crack/data perturbations.
"""

from .config import ConfigIssue, format_scenario, parse_scenario, scenario_equal
from .convergence import (ConvergenceReport, ScenarioSequence, SequenceError,
                          build_sequence, fixedpoint_convergence_check,
                          run_convergence)
from .elastodynamics import (AprioriReport, EnergyReport, TrajectoryState,
                             apriori_bound_audit, discrete_wnorm,
                             energy_audit, solve_elastodynamics,
                             sup_product_distance, uniform_bound)
from .expressions import Expression, ExpressionError, parse_expression
from .geometry import (CrackPath, CrackSchedule, Domain1D, Domain2D,
                       KornEstimate, build_broken_space, build_mesh,
                       check_motion_consistency, check_speed_condition,
                       estimate_korn_constant, snap_path, stretch_motion,
                       uncracked_space)
from .memory import (MemoryBoundReport, apply_T, eval_memory_direct,
                     init_memory, memory_norm_bounds, step_memory)
from .reporting import __version__, emit_plot_script, render_figure
from .scenario import (ScenarioConfig, ValidationReport, Workspace,
                       validate_scenario)
from .tensors import Tensor4Field, certify_coercivity, sum_tensors
from .viscoelastic import (ContractionError, ContractionSample,
                           FixedPointResult, apply_solution_map, linear_map,
                           matrix_load_table, measure_contraction,
                           random_trajectory, solve_fixedpoint,
                           solve_monolithic, uniqueness_probe)

__all__ = [
    "__version__",
    "AprioriReport", "ConfigIssue", "ContractionError", "ContractionSample",
    "ConvergenceReport", "CrackPath", "CrackSchedule", "Domain1D", "Domain2D",
    "EnergyReport", "Expression", "ExpressionError", "FixedPointResult",
    "KornEstimate", "MemoryBoundReport", "ScenarioConfig", "ScenarioSequence",
    "SequenceError", "Tensor4Field", "TrajectoryState", "ValidationReport",
    "Workspace",
    "apply_T", "apply_solution_map", "apriori_bound_audit",
    "build_broken_space", "build_mesh", "build_sequence",
    "certify_coercivity", "check_motion_consistency",
    "check_speed_condition", "discrete_wnorm", "emit_plot_script",
    "energy_audit", "estimate_korn_constant", "eval_memory_direct",
    "fixedpoint_convergence_check", "format_scenario", "init_memory",
    "linear_map", "matrix_load_table", "measure_contraction",
    "memory_norm_bounds", "parse_expression", "parse_scenario",
    "random_trajectory",
    "render_figure", "run_convergence", "scenario_equal", "snap_path",
    "solve_elastodynamics", "solve_fixedpoint", "solve_monolithic",
    "step_memory", "stretch_motion", "sum_tensors", "sup_product_distance",
    "uncracked_space", "uniform_bound", "uniqueness_probe",
    "validate_scenario",
]
