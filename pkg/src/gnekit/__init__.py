"""gnekit: generalized Nash equilibrium toolkit.

Computes normalized and non-normalized equilibria by assembling per-player
scaled KKT systems into mixed complementarity problems, explores the
equilibrium set as scaling factors vary, selects equilibria by bi-level
optimization, and runs a closed-loop two-car racing study.
"""

from .assembly import (GNESolution, KKTResidual, MCPInstance, assemble_full,
                       assemble_normalized, assemble_scaled, kkt_residual,
                       kkt_residual_per_player, solution_from_z)
from .explorer import (SensitivityReport, SweepResult, sensitivity, sweep,
                       sweep_to_csv, verify_monotonicity)
from .functions import ConstraintBlock, QuadraticFunction, SmoothFunction, linear
from .game import (FactorAssignment, FactorRule, GameSpec, PlayerSpec,
                   build_game, effective_multipliers, make_factors)
from .selector import (SelectionProblem, SelectionResult,
                       objective_single_player, objective_sum_of_costs, select)
from .solver import (SolveReport, SolveStatus, SolverOptions,
                     continuation_solve, fb_compose, multistart_solve,
                     natural_residual, solve)

__all__ = [
    "GNESolution", "KKTResidual", "MCPInstance", "assemble_full",
    "assemble_normalized", "assemble_scaled", "kkt_residual",
    "kkt_residual_per_player", "solution_from_z",
    "SensitivityReport", "SweepResult", "sensitivity", "sweep",
    "sweep_to_csv", "verify_monotonicity",
    "ConstraintBlock", "QuadraticFunction", "SmoothFunction", "linear",
    "FactorAssignment", "FactorRule", "GameSpec", "PlayerSpec",
    "build_game", "effective_multipliers", "make_factors",
    "SelectionProblem", "SelectionResult", "objective_single_player",
    "objective_sum_of_costs", "select",
    "SolveReport", "SolveStatus", "SolverOptions", "continuation_solve",
    "fb_compose", "multistart_solve", "natural_residual", "solve",
]

__version__ = "0.1.0"
