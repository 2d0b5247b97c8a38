"""Trace the equilibrium set as scaling factors vary, and compute local
sensitivities through the bordered linear system at an active solution.

A sweep maps a scalar parameter alpha onto a FactorAssignment (via the
standard two-player rules or a user-supplied factor_map), warm-starting each
solve from the previous converged point and flagging branch jumps.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .assembly import (active_shared, assemble_scaled, kkt_residual,
                       solution_from_z)
from .game import FactorAssignment, FactorRule, make_factors
from .solver import SolverOptions, default_start, solve

JUMP_TOL_SCALE = 0.1


def standard_factor_map(game, rule):
    """alpha -> FactorAssignment for the common two-player sweeps.

    SUM_TO_ONE: alpha in (0,1) is player 1's diagonal, player 2 gets 1-alpha.
    FIRST_PLAYER_IDENTITY: alpha in (0,inf) is player 2's diagonal, A_1 = I.
    """
    rule = FactorRule(rule)
    if game.M != 2:
        raise ValueError("standard rules cover two-player games; pass factor_map")
    m0 = game.m0
    if rule is FactorRule.SUM_TO_ONE:
        return lambda a: make_factors(2, m0, rule, np.full(m0, a))
    if rule is FactorRule.FIRST_PLAYER_IDENTITY:
        return lambda a: make_factors(2, m0, rule, np.full(m0, a))
    raise ValueError("sweeps need a parameterized rule or an explicit factor_map")


@dataclass
class SweepEntry:
    alpha: float
    solution: object          # GNESolution or None on failure
    costs: np.ndarray
    status: str
    jump_after: bool = False  # jump detected between this entry and the next
    alt_solution: object = None  # second basin surfaced by a cold re-solve


@dataclass
class SweepResult:
    entries: list
    jump_indices: list = field(default_factory=list)

    @property
    def alphas(self):
        return np.array([e.alpha for e in self.entries])

    def converged_entries(self):
        return [e for e in self.entries if e.solution is not None]


def sweep(game, rule=None, alpha_grid=(), factor_map=None, options=None,
          jump_tol_scale=JUMP_TOL_SCALE):
    """Solve the scaled assembly over a strictly increasing alpha grid."""
    alphas = np.asarray(list(alpha_grid), dtype=float)
    if alphas.size and np.any(np.diff(alphas) <= 0):
        raise ValueError("alpha grid must be strictly increasing")
    if factor_map is None:
        factor_map = standard_factor_map(game, rule)
    opts = options or SolverOptions()
    entries = []
    jumps = []
    warm = None
    prev_x = None
    for k, a in enumerate(alphas):
        factors = factor_map(float(a))
        inst = assemble_scaled(game, factors)
        report = solve(inst, opts, warm)
        if report.converged:
            sol = solution_from_z(game, inst.layout, report.z, factors)
            costs = game.costs(sol.x)
            entries.append(SweepEntry(float(a), sol, costs, report.status.value))
            if prev_x is not None:
                scale = max(1.0, float(np.max(np.abs(prev_x))))
                if float(np.max(np.abs(sol.x - prev_x))) > jump_tol_scale * scale:
                    entries[-2].jump_after = True
                    jumps.append(k - 1)
                    # re-solve from the cold start to surface the other basin
                    cold = solve(inst, opts, default_start(inst))
                    if cold.converged:
                        alt = solution_from_z(game, inst.layout, cold.z, factors)
                        if float(np.max(np.abs(alt.x - sol.x))) > 1e-6:
                            entries[-1].alt_solution = alt
            warm = report.z
            prev_x = sol.x
        else:
            entries.append(SweepEntry(float(a), None,
                                      np.full(game.M, np.nan),
                                      report.status.value))
            prev_x = None
    return SweepResult(entries, jumps)


@dataclass
class SensitivityReport:
    dsigma: np.ndarray            # per active shared constraint
    dx: np.ndarray                # full stacked decision vector
    dJ: np.ndarray                # per player, along the parameter direction
    condition: float
    hypothesis_ok: bool = True    # separable costs + block-diagonal quadratic s
    active: np.ndarray = None


def _check_corollary_hypotheses(game, x):
    """Separable costs (zero cross Hessian blocks) and quadratic shared
    constraints with block-diagonal curvature, probed at x."""
    for i, p in enumerate(game.players):
        bi = game.block_slices[i]
        g = p.cost.grad(x).copy()
        g[bi] = 0.0
        if np.max(np.abs(g)) > 1e-9:      # cost depends on other players
            return False
        H = p.cost.hess(x)
        off = H.copy()
        off[:, bi] = 0.0
        if np.max(np.abs(off[bi, :])) > 1e-9:
            return False
    for b in game.shared_blocks:
        Q = b.hess_combo(x, np.ones(b.size))
        for i in range(game.M):
            for j in range(game.M):
                if i != j:
                    if np.max(np.abs(Q[game.block_slices[i], game.block_slices[j]])) > 1e-9:
                        return False
    return True


def sensitivity(game, factors, solution, direction=None, options=None):
    """Local derivatives of (x, sigma, J_i) along a factor perturbation.

    ``direction`` gives d(alpha_i)/d(theta) per player for the scalar
    parameter theta being varied, where each A_i = alpha_i * I on the active
    shared set. Defaults to the coupled direction (+1 for player 1, -1 for
    everyone else), matching the two-player alpha/(1-alpha) parameterization.
    """
    x = np.asarray(solution.x, dtype=float)
    sigma = np.asarray(solution.sigma, dtype=float)
    M, n = game.M, game.n
    if direction is None:
        direction = np.array([1.0] + [-1.0] * (M - 1))
    direction = np.asarray(direction, dtype=float)
    act = active_shared(game, x, sigma)
    if act.size == 0:
        raise ValueError("no active shared constraint at this solution")
    Js = game.shared_jac(x)[act, :]
    sig_a = sigma[act]

    # stationarity curvature w.r.t. x (active multipliers held at their values)
    H = np.zeros((n, n))
    for i in range(M):
        bi = game.block_slices[i]
        xi = x[bi]
        H[bi, :] = game.players[i].cost.hess(x)[bi, :]
        mu_i = np.asarray(solution.mus[i], dtype=float)
        lam_i = np.asarray(solution.lams[i], dtype=float)
        if mu_i.size:
            H[bi, bi] += game.private_eq_hess_combo(i, xi, mu_i)
        if lam_i.size:
            H[bi, bi] += game.private_ineq_hess_combo(i, xi, lam_i)
        si = factors.scale(i, sigma)
        if np.any(si != 0.0):
            H[bi, :] += game.shared_hess_combo(x, si)[bi, :]

    # active private equality constraints and active private inequalities
    eq_rows = []
    for i in range(M):
        bi = game.block_slices[i]
        xi = x[bi]
        Jh = game.private_eq_jac(i, xi)
        for r in range(Jh.shape[0]):
            row = np.zeros(n)
            row[bi] = Jh[r]
            eq_rows.append(row)
        lam_i = np.asarray(solution.lams[i], dtype=float)
        if lam_i.size:
            Jg = game.private_ineq_jac(i, xi)
            for r in np.flatnonzero(lam_i >= 1e-7):
                row = np.zeros(n)
                row[bi] = Jg[r]
                eq_rows.append(row)
    E = np.vstack(eq_rows) if eq_rows else np.zeros((0, n))
    ne = E.shape[0]

    # multiplier-direction columns: d(stationarity)/d(sigma_active)
    G = np.zeros((n, act.size))
    for i in range(M):
        bi = game.block_slices[i]
        G[bi, :] = Js[:, bi].T * factors.diagonals[i][act][None, :]

    # bordered matrix: unknowns [dx, dmu_active, dsigma_active]
    na = act.size
    dim = n + ne + na
    J = np.zeros((dim, dim))
    J[:n, :n] = H
    J[:n, n:n + ne] = E.T
    J[:n, n + ne:] = G
    J[n:n + ne, :n] = E
    J[n + ne:, :n] = Js

    rhs = np.zeros(dim)
    for i in range(M):
        bi = game.block_slices[i]
        rhs[bi] = -direction[i] * (Js[:, bi].T @ sig_a)

    cond = float(np.linalg.cond(J))
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError("bordered system is numerically singular")
    sol_vec = np.linalg.solve(J, rhs)
    dx = sol_vec[:n]
    dsigma = sol_vec[n + ne:]
    dJ = np.zeros(M)
    for i in range(M):
        dJ[i] = float(game.players[i].cost.grad(x) @ dx)
    ok = _check_corollary_hypotheses(game, x)
    return SensitivityReport(dsigma=dsigma, dx=dx, dJ=dJ, condition=cond,
                             hypothesis_ok=ok, active=act)


@dataclass
class MonotonicityReport:
    player: int
    own_factor: np.ndarray
    costs: np.ndarray
    violations: list

    @property
    def ok(self):
        return not self.violations


def verify_monotonicity(game, rule, alpha_grid, player, factor_map=None,
                        options=None, slack=1e-8):
    """Check that a player's cost is non-decreasing in its own factor."""
    if factor_map is None:
        factor_map = standard_factor_map(game, rule)
    res = sweep(game, rule, alpha_grid, factor_map=factor_map, options=options)
    own = []
    costs = []
    for e in res.converged_entries():
        f = factor_map(e.alpha)
        own.append(float(f.diagonals[player][0]))
        costs.append(float(e.costs[player]))
    order = np.argsort(own)
    own = np.asarray(own)[order]
    costs = np.asarray(costs)[order]
    violations = []
    for k in range(1, own.size):
        if costs[k] < costs[k - 1] - slack:
            violations.append((float(own[k - 1]), float(own[k]),
                               float(costs[k - 1]), float(costs[k])))
    return MonotonicityReport(player, own, costs, violations)


def sweep_to_csv(game, result, stream=None, fmt="%.17g"):
    """Emit a sweep table: alpha, x..., sigma..., J_1..J_M, status, jump."""
    out = stream or io.StringIO()
    m0 = game.m0
    header = (["alpha"] + [f"x{j}" for j in range(game.n)]
              + [f"sigma{j}" for j in range(m0)]
              + [f"J{i + 1}" for i in range(game.M)] + ["status", "jump"])
    out.write(",".join(header) + "\n")
    for e in result.entries:
        if e.solution is not None:
            vals = ([e.alpha] + list(e.solution.x) + list(e.solution.sigma)
                    + list(e.costs))
            row = [fmt % v for v in vals] + [e.status, str(int(e.jump_after))]
        else:
            row = ([fmt % e.alpha] + [""] * (game.n + m0 + game.M)
                   + [e.status, "0"])
        out.write(",".join(row) + "\n")
    if stream is None:
        return out.getvalue()
    return None
