"""Bi-level equilibrium selection: search factor parameters to minimize a
top-level objective evaluated at the induced equilibrium.

The outer search is derivative-free (the inner map may jump across
branches): a coarse grid pass followed by golden-section refinement for one
parameter, Nelder-Mead otherwise. Boundary optima are flagged rather than
evaluated at the open-domain edge; a near-edge limit solve is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sciopt

from .assembly import assemble_scaled, solution_from_z
from .explorer import standard_factor_map
from .solver import SolverOptions, multistart_solve

EDGE_EPS = 1e-3
EDGE_LIMIT_INSET = 1e-8
GOLDEN_TOL = 1e-10


def objective_sum_of_costs(game):
    """J0(x) = sum_i J_i(x)."""
    def J0(x):
        return float(np.sum(game.costs(x)))
    return J0


def objective_single_player(game, i):
    """J0(x) = J_i(x) (1-based player index)."""
    if not 1 <= i <= game.M:
        raise IndexError("player index out of range")
    def J0(x):
        return float(game.cost(i - 1, x))
    return J0


@dataclass
class SelectionProblem:
    game: object
    objective: object                 # J0: x -> float
    factor_map: object = None         # params (k,) -> FactorAssignment
    rule: object = None               # used when factor_map is None (2 players)
    lower: np.ndarray = None          # admissible parameter box
    upper: np.ndarray = None
    grid_density: int = 11
    refine_iters: int = 60
    edge_eps: float = EDGE_EPS
    seeds: tuple = (0,)
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.factor_map is None:
            fm = standard_factor_map(self.game, self.rule)
            self.factor_map = lambda p: fm(float(np.atleast_1d(p)[0]))
            if self.lower is None:
                self.lower = np.array([self.edge_eps])
                from .game import FactorRule
                hi = 1.0 - self.edge_eps if FactorRule(self.rule) is FactorRule.SUM_TO_ONE else 1e3
                self.upper = np.array([hi])
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.grid_density < 2:
            raise ValueError("grid density must be >= 2 per parameter")
        if np.any(self.lower >= self.upper):
            raise ValueError("empty admissible box")


@dataclass
class TraceEntry:
    params: np.ndarray
    value: float
    costs: np.ndarray
    status: str
    n_basins: int = 1


@dataclass
class SelectionResult:
    params: np.ndarray
    solution: object
    value: float
    trace: list
    boundary: bool
    boundary_limit: object = None     # near-edge limit GNESolution when flagged
    boundary_limit_params: np.ndarray = None


def _evaluate(problem, params):
    """Inner solve at one parameter point; J0 over the best basin."""
    factors = problem.factor_map(np.asarray(params, dtype=float))
    inst = assemble_scaled(problem.game, factors)
    report = multistart_solve(inst, problem.options, seeds=problem.seeds)
    if not report.converged:
        return None, TraceEntry(np.atleast_1d(np.asarray(params, dtype=float)),
                                np.inf, np.full(problem.game.M, np.nan),
                                report.status.value, 0)
    best_val = np.inf
    best_sol = None
    basins = report.basins or [report.z]
    for z in basins:
        sol = solution_from_z(problem.game, inst.layout, z, factors)
        v = problem.objective(sol.x)
        if v < best_val - 0.0:
            best_val = v
            best_sol = sol
    entry = TraceEntry(np.atleast_1d(np.asarray(params, dtype=float)),
                       float(best_val), problem.game.costs(best_sol.x),
                       report.status.value, len(basins))
    return best_sol, entry


def _golden_section(f, lo, hi, iters):
    """Deterministic bounded golden-section minimization."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < GOLDEN_TOL:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def select(problem: SelectionProblem) -> SelectionResult:
    """Coarse grid then local refinement of J0 over the parameter box."""
    k = problem.lower.size
    axes = [np.linspace(problem.lower[j], problem.upper[j], problem.grid_density)
            for j in range(k)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    trace = []
    cache = {}

    def eval_point(p):
        key = tuple(np.round(p, 15))
        if key in cache:
            return cache[key]
        sol, entry = _evaluate(problem, p)
        trace.append(entry)
        cache[key] = (sol, entry)
        return sol, entry

    best_sol, best_entry = None, None
    for p in mesh:
        sol, entry = eval_point(p)
        if sol is None:
            continue
        if best_entry is None or entry.value < best_entry.value or (
                entry.value == best_entry.value
                and tuple(entry.params) < tuple(best_entry.params)):
            best_sol, best_entry = sol, entry
    if best_entry is None:
        raise RuntimeError("all inner solves failed on the selection grid")

    if k == 1:
        step = (problem.upper[0] - problem.lower[0]) / (problem.grid_density - 1)
        lo = max(problem.lower[0], best_entry.params[0] - step)
        hi = min(problem.upper[0], best_entry.params[0] + step)

        def f1(a):
            sol, entry = eval_point(np.array([a]))
            return entry.value

        a_star, v_star = _golden_section(f1, lo, hi, problem.refine_iters)
        sol, entry = eval_point(np.array([a_star]))
        if sol is not None and entry.value < best_entry.value:
            best_sol, best_entry = sol, entry
    else:
        def fnd(p):
            p = np.clip(p, problem.lower, problem.upper)
            sol, entry = eval_point(p)
            return entry.value

        res = sciopt.minimize(fnd, best_entry.params, method="Nelder-Mead",
                              options={"maxiter": problem.refine_iters,
                                       "xatol": 1e-8, "fatol": 1e-12})
        p = np.clip(res.x, problem.lower, problem.upper)
        sol, entry = eval_point(p)
        if sol is not None and entry.value < best_entry.value:
            best_sol, best_entry = sol, entry

    at_edge = np.any(best_entry.params <= problem.lower + problem.edge_eps) or \
        np.any(best_entry.params >= problem.upper - problem.edge_eps)
    limit_sol = None
    limit_params = None
    if at_edge:
        limit_params = best_entry.params.copy()
        for j in range(k):
            if best_entry.params[j] <= problem.lower[j] + problem.edge_eps:
                limit_params[j] = problem.lower[j] - problem.edge_eps + EDGE_LIMIT_INSET
            elif best_entry.params[j] >= problem.upper[j] - problem.edge_eps:
                limit_params[j] = problem.upper[j] + problem.edge_eps - EDGE_LIMIT_INSET
        try:
            limit_sol, _ = _evaluate(problem, limit_params)
        except Exception:
            limit_sol = None
    return SelectionResult(params=best_entry.params, solution=best_sol,
                           value=best_entry.value, trace=trace,
                           boundary=bool(at_edge), boundary_limit=limit_sol,
                           boundary_limit_params=limit_params)
