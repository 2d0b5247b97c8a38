"""End-to-end acceptance checks, one test per shipped guarantee.

Each test prints a single PASS/FAIL line (past pytest's capture) so the
suite doubles as a release report.
"""

import time

import numpy as np
import pytest

from gnekit.assembly import (assemble_normalized, assemble_scaled,
                             kkt_residual_per_player, solution_from_z)
from gnekit.explorer import sensitivity, sweep
from gnekit.functions import QuadraticFunction, linear
from gnekit.game import (FactorAssignment, FactorRule, PlayerSpec, build_game,
                         make_factors)
from gnekit.oracles import (example1, example1_game, harker, harker_game,
                            three_car, three_car_game)
from gnekit.selector import SelectionProblem, objective_sum_of_costs, select
from gnekit.solver import SolverOptions, multistart_solve, solve

from test_solver import brute_force_mcp, random_affine_mcp


def _report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


# -- 1: Example-1 normalized point and alpha sweep --------------------------


def test_criterion_1_example1(capsys):
    t0 = time.perf_counter()
    g = example1_game()
    rep = solve(assemble_normalized(g), SolverOptions())
    err_norm = float(np.max(np.abs(rep.z[:2] - [0.75, 0.25])))

    grid = np.round(np.arange(0.05, 0.951, 0.05), 10)
    res = sweep(g, FactorRule.SUM_TO_ONE, grid)
    errs = [float(np.max(np.abs(e.solution.x - np.array(example1(e.alpha)))))
            for e in res.entries if e.solution is not None]
    n_conv = len(errs)
    err_sweep = max(errs) if errs else np.inf
    dt = time.perf_counter() - t0

    ok = (rep.converged and err_norm <= 1e-6 and n_conv == grid.size
          and err_sweep <= 1e-6 and dt < 1.0)
    _report(capsys, 1, ok,
            f"normalized err={err_norm:.2e}, sweep {n_conv}/{grid.size} "
            f"converged, max err={err_sweep:.2e}, runtime {dt:.2f}s (<1s)")


# -- 2: three-car family ------------------------------------------------------


def test_criterion_2_three_car(capsys):
    t0 = time.perf_counter()
    g = three_car_game()
    rep = solve(assemble_normalized(g), SolverOptions())
    pos = rep.z[[0, 2, 4]]
    err_norm = float(np.max(np.abs(pos - [1.0, 1.125, 1.125])))

    # scaled solves across the family parameter
    err_grid = 0.0
    for a in np.linspace(0.1, 0.9, 9):
        f = make_factors(3, 1, FactorRule.UNNORMALIZED, [1.0, a, 1.0 - a])
        r = solve(assemble_scaled(g, f), SolverOptions())
        assert r.converged
        err_grid = max(err_grid, float(np.max(np.abs(r.z[:6] - three_car(a)))))

    # player-1 factor invariance
    sols = []
    for a1 in (0.1, 1.0, 10.0):
        f = make_factors(3, 1, FactorRule.UNNORMALIZED, [a1, 0.5, 0.5])
        r = solve(assemble_scaled(g, f), SolverOptions(tol_residual=1e-12))
        assert r.converged
        sols.append(r.z[:6])
    err_inv = max(float(np.max(np.abs(s - sols[0]))) for s in sols[1:])
    dt = time.perf_counter() - t0

    ok = (err_norm <= 1e-6 and err_grid <= 1e-6 and err_inv <= 1e-8
          and dt < 1.0)
    _report(capsys, 2, ok,
            f"normalized err={err_norm:.2e}, grid err={err_grid:.2e}, "
            f"factor-1 invariance={err_inv:.2e}, runtime {dt:.2f}s (<1s)")


# -- 3: Harker interior and budget-active branches ---------------------------


def test_criterion_3_harker(capsys):
    t0 = time.perf_counter()
    g = harker_game()
    err_int = 0.0
    for a in (0.5, 1.0, 2.0, 3.0, 10.0):
        f = make_factors(2, 1, FactorRule.FIRST_PLAYER_IDENTITY, [a])
        inst = assemble_scaled(g, f)
        r = solve(inst, SolverOptions())
        assert r.converged
        err_int = max(err_int, float(np.max(np.abs(r.z[:2] - [5.0, 9.0]))))

    err_act = 0.0
    boundary_seed = np.concatenate([[9.0, 6.0], np.zeros(4), [1.0]])
    for a in (2.7, 3.0, 5.0, 10.0):
        cand = [c for c in harker(a) if c.active][0]
        f = make_factors(2, 1, FactorRule.FIRST_PLAYER_IDENTITY, [a])
        inst = assemble_scaled(g, f)
        r = solve(inst, SolverOptions(restarts=0), boundary_seed)
        assert r.converged
        err_act = max(err_act,
                      float(np.max(np.abs(r.z[:2] - cand.x))),
                      abs(float(r.z[-1]) - cand.sigma))

    # at alpha = 2 the closed form puts x1 = 75/7 > 10: branch must be absent
    den = 8.0 * 2.0 - 9.0
    x1_formula = (72.0 * 2.0 - 69.0) / den
    absent = (not any(c.active for c in harker(2.0))) and x1_formula > 10.0
    dt = time.perf_counter() - t0

    ok = err_int <= 1e-6 and err_act <= 1e-6 and absent and dt < 1.0
    _report(capsys, 3, ok,
            f"interior err={err_int:.2e}, active err={err_act:.2e}, "
            f"branch absent at alpha=2 (x1={x1_formula:.3f}>10): {absent}, "
            f"runtime {dt:.2f}s (<1s)")


# -- 4: scaled-to-unscaled KKT round trip on random quadratic games ----------


def _random_quadratic_game(rng):
    M = int(rng.integers(2, 5))
    dims = [int(rng.integers(1, 3)) for _ in range(M)]
    n = sum(dims)
    m0 = int(rng.integers(1, 4))
    players = []
    off = 0
    for i in range(M):
        Q = rng.normal(size=(n, n), scale=0.1)
        Q = 0.5 * (Q + Q.T)
        bi = slice(off, off + dims[i])
        own = rng.normal(size=(dims[i], dims[i]))
        Q[bi, bi] = own @ own.T + (dims[i] + 1.0) * np.eye(dims[i])
        players.append(PlayerSpec(dims[i], QuadraticFunction(Q, rng.normal(size=n))))
        off += dims[i]
    shared = [linear(rng.normal(size=n), rng.normal() - 1.0)
              for _ in range(m0)]
    game = build_game(players, shared)
    diags = tuple(rng.uniform(0.2, 3.0, size=m0) for _ in range(M))
    return game, FactorAssignment(diags)


def test_criterion_4_round_trip(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n_games = n_conv = 0
    worst = 0.0
    while n_games < 50:
        game, factors = _random_quadratic_game(rng)
        n_games += 1
        inst = assemble_scaled(game, factors)
        rep = multistart_solve(inst, SolverOptions(tol_residual=1e-10),
                               seeds=(0, 1))
        if not rep.converged:
            continue
        n_conv += 1
        sol = solution_from_z(game, inst.layout, rep.z, factors)
        res = kkt_residual_per_player(game, sol.x, sol.mus, sol.lams,
                                      sol.effective_sigmas)
        worst = max(worst, res.overall)
    dt = time.perf_counter() - t0

    ok = n_conv >= 45 and worst <= 1e-7 and dt < 30.0
    _report(capsys, 4, ok,
            f"{n_conv}/50 games converged, worst unscaled KKT residual "
            f"{worst:.2e} (<=1e-7), runtime {dt:.1f}s (<30s)")


# -- 5: bordered-system sensitivities vs finite differences ------------------


def _random_separable_game(rng):
    """Two players, one decision each, separable strongly convex costs,
    one shared linear constraint forced active at equilibrium."""
    d = rng.uniform(1.0, 4.0, size=2)
    q = rng.normal(size=2)
    players = [
        PlayerSpec(1, QuadraticFunction(np.diag([d[0], 0.0]), [q[0], 0.0])),
        PlayerSpec(1, QuadraticFunction(np.diag([0.0, d[1]]), [0.0, q[1]])),
    ]
    a = rng.uniform(0.5, 2.0, size=2)
    # unconstrained equilibrium, then shift the offset to violate it
    x_free = np.array([-q[0] / d[0], -q[1] / d[1]])
    b = -float(a @ x_free) + rng.uniform(0.3, 1.0)
    return build_game(players, [linear(a, b)])


def _solve_family(game, alpha, tol=1e-12):
    f = make_factors(2, 1, FactorRule.SUM_TO_ONE, [alpha])
    inst = assemble_scaled(game, f)
    rep = solve(inst, SolverOptions(tol_residual=tol))
    assert rep.converged
    return f, solution_from_z(game, inst.layout, rep.z, f)


def _fd_check(game, alpha, h=1e-5):
    f, sol = _solve_family(game, alpha)
    rep = sensitivity(game, f, sol)
    _, sp = _solve_family(game, alpha + h)
    _, sm = _solve_family(game, alpha - h)
    fd_x = (sp.x - sm.x) / (2 * h)
    fd_sig = (sp.sigma - sm.sigma) / (2 * h)
    fd_J = (game.costs(sp.x) - game.costs(sm.x)) / (2 * h)
    scale_x = max(1.0, float(np.max(np.abs(fd_x))))
    scale_s = max(1.0, float(np.max(np.abs(fd_sig))))
    scale_J = max(1.0, float(np.max(np.abs(fd_J))))
    rel = max(float(np.max(np.abs(rep.dx - fd_x))) / scale_x,
              float(np.max(np.abs(rep.dsigma - fd_sig))) / scale_s,
              float(np.max(np.abs(rep.dJ - fd_J))) / scale_J)
    return rel, rep, f, sol


def test_criterion_5_sensitivity(capsys):
    t0 = time.perf_counter()
    worst_rel = 0.0
    worst_dJ = np.inf
    n_hyp = 0

    # analytic instance
    g = example1_game()
    for alpha in (0.25, 0.5, 0.75):
        rel, rep, f, sol = _fd_check(g, alpha)
        worst_rel = max(worst_rel, rel)
        if rep.hypothesis_ok:
            for i in range(2):
                # raise player i's factor relative to the other player
                direction = np.full(2, -1.0)
                direction[i] = 1.0
                own = sensitivity(g, f, sol, direction=direction)
                worst_dJ = min(worst_dJ, float(own.dJ[i]))
                n_hyp += 1

    # randomized separable instances
    rng = np.random.default_rng(99)
    n_inst = 0
    while n_inst < 20:
        game = _random_separable_game(rng)
        alpha = float(rng.uniform(0.2, 0.8))
        _, sol0 = _solve_family(game, alpha)
        if float(np.max(game.shared_value(sol0.x))) < -1e-8:
            continue      # shared constraint not active; redraw
        n_inst += 1
        rel, rep, f, sol = _fd_check(game, alpha)
        worst_rel = max(worst_rel, rel)
        if rep.hypothesis_ok:
            for i in range(2):
                # raise player i's factor relative to the other player
                direction = np.full(2, -1.0)
                direction[i] = 1.0
                own = sensitivity(game, f, sol, direction=direction)
                worst_dJ = min(worst_dJ, float(own.dJ[i]))
                n_hyp += 1
    dt = time.perf_counter() - t0

    ok = (worst_rel <= 1e-3 and worst_dJ >= -1e-10 and n_hyp > 0
          and dt < 30.0)
    _report(capsys, 5, ok,
            f"worst FD rel err={worst_rel:.2e} (<=1e-3) over example + "
            f"{n_inst} random instances, min dJ_i/dalpha_i={worst_dJ:.2e} "
            f"(>=-1e-10, {n_hyp} checks), runtime {dt:.1f}s (<30s)")


# -- 6: bi-level selection ----------------------------------------------------


def test_criterion_6_selection(capsys):
    t0 = time.perf_counter()
    # three-car: sum of costs falls toward the open edge alpha -> 1, where
    # the family limit has positions (1, 0.75, 0.75)
    g3 = three_car_game()

    def fmap(p):
        a = float(np.atleast_1d(p)[0])
        return make_factors(3, 1, FactorRule.UNNORMALIZED, [1.0, a, 1.0 - a])

    prob3 = SelectionProblem(g3, objective_sum_of_costs(g3), factor_map=fmap,
                             lower=np.array([1e-3]),
                             upper=np.array([1.0 - 1e-3]),
                             grid_density=11, refine_iters=40)
    res3 = select(prob3)
    limit_pos = np.asarray(res3.boundary_limit.x)[[0, 2, 4]] \
        if res3.boundary_limit is not None else np.full(3, np.nan)
    err3 = float(np.max(np.abs(limit_pos - [1.0, 0.75, 0.75])))
    race_ok = res3.boundary and res3.params[0] >= 1.0 - 1e-3 - 1e-9 \
        and err3 <= 1e-6

    # Example-1: sum-of-costs argmin is the interior point alpha = 1/2
    g1 = example1_game()
    prob1 = SelectionProblem(g1, objective_sum_of_costs(g1),
                             rule=FactorRule.SUM_TO_ONE, grid_density=11,
                             refine_iters=40)
    res1 = select(prob1)
    grid_step = (prob1.upper[0] - prob1.lower[0]) / (prob1.grid_density - 1)
    ex1_ok = (not res1.boundary
              and abs(res1.params[0] - 0.5) <= grid_step)
    dt = time.perf_counter() - t0

    ok = race_ok and ex1_ok and dt < 10.0
    _report(capsys, 6, ok,
            f"three-car boundary alpha->1 limit positions err={err3:.2e}; "
            f"Example-1 argmin alpha={res1.params[0]:.6f} (grid-verified "
            f"0.5; note: diverges from the previously published alpha*=1, "
            f"which the closed form contradicts), runtime {dt:.1f}s (<10s)")


# -- 7: racing Monte Carlo directional property -------------------------------


def test_criterion_7_monte_carlo(capsys):
    from gnekit.racing.montecarlo import monte_carlo
    t0 = time.perf_counter()
    summary = monte_carlo(n_runs=100, seed=7)
    dt = time.perf_counter() - t0
    aggr = summary.win_rate_aggressive
    norm = summary.win_rate_normalized
    uplift = (aggr - norm) * 100.0
    med_ms = summary.median_solve_time * 1e3
    target_note = "met" if dt < 600.0 else "missed"

    ok = (uplift >= 5.0
          and 0.25 <= norm <= 0.75 and 0.25 <= aggr <= 0.75
          and med_ms < 50.0)
    _report(capsys, 7, ok,
            f"win rate aggressive={aggr:.1%} vs normalized={norm:.1%} "
            f"(uplift {uplift:+.1f}pp, >=+5pp), both in [25%,75%]; "
            f"{summary.n_valid}/100 valid runs; median solve "
            f"{med_ms:.1f}ms (<50ms); runtime {dt:.0f}s "
            f"(10-min target {target_note})")


# -- 8: solver branch equivalence and oracle warm starts ----------------------


def test_criterion_8_solver_suite(capsys):
    t0 = time.perf_counter()
    # randomized MCPs vs brute-force branch enumeration
    worst = 0.0
    for seed in range(12):
        rng = np.random.default_rng(seed)
        inst, M, q = random_affine_mcp(rng)
        rep = multistart_solve(inst, SolverOptions(tol_residual=1e-12),
                               seeds=(0, 1, 2))
        assert rep.converged
        refs = brute_force_mcp(M, q, inst.lower, inst.upper)
        worst = max(worst, min(float(np.max(np.abs(rep.z - r)))
                               for r in refs))

    # oracle warm starts: every closed form converges within 3 iterations
    max_iters = 0
    g = example1_game()
    for alpha in (0.2, 0.5, 0.8):
        f = make_factors(2, 1, FactorRule.SUM_TO_ONE, [alpha])
        z0 = np.concatenate([example1(alpha), [1.0]])
        r = solve(assemble_scaled(g, f), SolverOptions(restarts=0), z0)
        assert r.converged
        max_iters = max(max_iters, r.iterations)
    g = three_car_game()
    for a in (0.3, 0.5, 0.7):
        f = make_factors(3, 1, FactorRule.UNNORMALIZED, [1.0, a, 1.0 - a])
        x = three_car(a)
        z0 = np.concatenate([x, [x[1], x[3], x[5]], [0.75]])
        r = solve(assemble_scaled(g, f), SolverOptions(restarts=0), z0)
        assert r.converged
        max_iters = max(max_iters, r.iterations)
    g = harker_game()
    for alpha in (0.5, 1.0, 3.0, 10.0):
        f = make_factors(2, 1, FactorRule.FIRST_PLAYER_IDENTITY, [alpha])
        inst = assemble_scaled(g, f)
        for cand in harker(alpha):
            z0 = np.concatenate([cand.x, np.zeros(4), [cand.sigma]])
            r = solve(inst, SolverOptions(restarts=0), z0)
            assert r.converged
            max_iters = max(max_iters, r.iterations)
    dt = time.perf_counter() - t0

    ok = worst <= 1e-7 and max_iters <= 3
    _report(capsys, 8, ok,
            f"brute-force branch match worst err={worst:.2e} (<=1e-7) over "
            f"12 random MCPs; oracle warm starts converge in <= "
            f"{max_iters} iterations (<=3); runtime {dt:.1f}s")
