"""Command-line front end.

Subcommands: solve, sweep, select, race, mc, oracle. Every run that writes
files also writes a ``manifest.json`` echo of the effective options beside
them; CSV outputs embed the manifest hash and seed as comment headers.

Exit codes: 0 success, 1 usage/input error, 2 numerical failure.
Set GNEP_LOG=debug for verbose progress on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from .assembly import assemble_scaled, kkt_residual, solution_from_z
from .explorer import standard_factor_map, sweep, sweep_to_csv
from .game import FactorRule, make_factors
from .oracles import example1, example1_sigma, harker, three_car, three_car_sigma
from .racing.bicycle import CarState
from .racing.montecarlo import monte_carlo
from .racing.sim import RaceScenario, simulate_closed_loop
from .scenario import (BUILTIN_GAMES, ScenarioError, Scenario,
                       load_scenario, mc_config_from_scenario)
from .selector import SelectionProblem, objective_sum_of_costs, select
from .solver import SolverOptions, multistart_solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2

FLOAT_FMT = "%.17g"


def _log(msg):
    if os.environ.get("GNEP_LOG", "").lower() in ("1", "debug", "verbose"):
        print(msg, file=sys.stderr)


def _load(scenario_arg):
    """Scenario path, or a bare builtin name as shorthand."""
    if scenario_arg in BUILTIN_GAMES:
        from .scenario import _DEFAULT_RULES
        return Scenario(path="<builtin>", name=scenario_arg,
                        game=BUILTIN_GAMES[scenario_arg](),
                        builtin=scenario_arg,
                        rule=_DEFAULT_RULES[scenario_arg])
    return load_scenario(scenario_arg)


def _rule(args, scenario):
    if getattr(args, "rule", None):
        return FactorRule(args.rule)
    if scenario.rule is not None:
        return scenario.rule
    raise ScenarioError("no factor rule: pass --rule or set [factors].rule")


def _manifest(args, extra=None):
    m = {"subcommand": args.command,
         "scenario": getattr(args, "scenario", None),
         "options": {k: v for k, v in vars(args).items()
                     if k not in ("command", "func", "scenario", "out")
                     and v is not None}}
    if extra:
        m.update(extra)
    return m


def _manifest_hash(manifest):
    blob = json.dumps(manifest, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_outputs(args, manifest, files):
    """files: {name: text}. Prefixes CSVs with manifest hash + seed lines."""
    out = Path(args.out) if getattr(args, "out", None) else None
    mh = _manifest_hash(manifest)
    seed = getattr(args, "seed", None)
    stamped = {}
    for name, text in files.items():
        if name.endswith(".csv"):
            head = f"# manifest_hash={mh}\n# seed={seed}\n"
            text = head + text
        stamped[name] = text
    if out is None:
        for name, text in stamped.items():
            sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps({**manifest, "hash": mh}, indent=2, default=str) + "\n")
    for name, text in stamped.items():
        (out / name).write_text(text)
        _log(f"wrote {out / name}")


def _solver_options(args):
    if getattr(args, "tol", None):
        return SolverOptions(tol_residual=args.tol)
    return None


def _grid(spec):
    try:
        lo, hi, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ScenarioError(f"--grid: expected lo:hi:step, got '{spec}'")
    if step <= 0 or hi < lo:
        raise ScenarioError("--grid: need step > 0 and hi >= lo")
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _solution_doc(game, factors, sol, report):
    res = kkt_residual(game, factors, sol)
    return {
        "x": list(sol.x),
        "sigma": list(sol.sigma),
        "effective_sigmas": [list(s) for s in sol.effective_sigmas],
        "mus": [list(m) for m in sol.mus],
        "lams": [list(l) for l in sol.lams],
        "costs": list(game.costs(sol.x)),
        "fb_residual": report.fb_residual,
        "kkt_residual": res.overall,
        "status": report.status.value,
        "iterations": report.iterations,
    }


def cmd_solve(args):
    scenario = _load(args.scenario)
    if scenario.game is None:
        raise ScenarioError(f"{args.scenario}: no game defined")
    game = scenario.game
    rule = _rule(args, scenario)
    alpha = args.alpha if args.alpha is not None else scenario.alpha
    if alpha is None:
        raise ScenarioError("no alpha: pass --alpha or set [factors].alpha")
    if game.M == 2:
        factors = standard_factor_map(game, rule)(alpha)
    else:
        free = np.full((game.M - 1) * game.m0, alpha)
        factors = make_factors(game.M, game.m0, rule, free)
    inst = assemble_scaled(game, factors)
    opts = _solver_options(args)
    seeds = tuple(range(args.seed, args.seed + 8))
    report = multistart_solve(inst, opts, seeds=seeds)
    if not report.converged:
        print(json.dumps({"status": report.status.value,
                          "fb_residual": report.fb_residual}, indent=2))
        return EXIT_NUMERICAL
    docs = []
    for z in (report.basins or [report.z]):
        sol = solution_from_z(game, inst.layout, z, factors)
        docs.append(_solution_doc(game, factors, sol, report))
    doc = {"scenario": scenario.name, "alpha": alpha, "rule": rule.value,
           "n_candidates": len(docs), "candidates": docs}
    manifest = _manifest(args)
    _write_outputs(args, manifest, {"solution.json": json.dumps(doc, indent=2) + "\n"})
    return EXIT_OK


def cmd_sweep(args):
    scenario = _load(args.scenario)
    if scenario.game is None:
        raise ScenarioError(f"{args.scenario}: no game defined")
    game = scenario.game
    rule = _rule(args, scenario)
    grid = _grid(args.grid)
    if game.M == 2:
        fmap = standard_factor_map(game, rule)
    else:
        fmap = lambda a: make_factors(game.M, game.m0, rule,
                                      np.full((game.M - 1) * game.m0, a))
    res = sweep(game, alpha_grid=grid, factor_map=fmap,
                options=_solver_options(args))
    csv = sweep_to_csv(game, res, fmt=FLOAT_FMT)
    if any(e.solution is None for e in res.entries):
        code = EXIT_NUMERICAL
    else:
        code = EXIT_OK
    _write_outputs(args, _manifest(args), {"sweep.csv": csv})
    return code


def cmd_select(args):
    scenario = _load(args.scenario)
    if scenario.game is None:
        raise ScenarioError(f"{args.scenario}: no game defined")
    game = scenario.game
    rule = _rule(args, scenario)
    if game.M == 2:
        problem = SelectionProblem(game, objective_sum_of_costs(game),
                                   rule=rule, options=_solver_options(args),
                                   seeds=tuple(range(args.seed, args.seed + 4)))
    else:
        fm = lambda p: make_factors(game.M, game.m0, rule,
                                    np.full((game.M - 1) * game.m0,
                                            float(np.atleast_1d(p)[0])))
        problem = SelectionProblem(game, objective_sum_of_costs(game),
                                   factor_map=fm,
                                   lower=np.array([1e-3]),
                                   upper=np.array([1.0 - 1e-3]),
                                   options=_solver_options(args),
                                   seeds=tuple(range(args.seed, args.seed + 4)))
    result = select(problem)
    rows = ["params,value,costs,status,n_basins"]
    for t in problem_trace(result):
        rows.append(",".join([
            ";".join(FLOAT_FMT % v for v in t.params),
            FLOAT_FMT % t.value,
            ";".join(FLOAT_FMT % c for c in t.costs),
            t.status, str(t.n_basins)]))
    doc = {"params": list(result.params), "value": result.value,
           "boundary": result.boundary}
    if result.solution is not None:
        doc["x"] = list(result.solution.x)
    if result.boundary_limit is not None:
        doc["boundary_limit_params"] = list(result.boundary_limit_params)
        doc["boundary_limit_x"] = list(result.boundary_limit.x)
    _write_outputs(args, _manifest(args),
                   {"selection.json": json.dumps(doc, indent=2) + "\n",
                    "trace.csv": "\n".join(rows) + "\n"})
    return EXIT_OK


def problem_trace(result):
    return sorted(result.trace, key=lambda t: tuple(t.params))


def cmd_race(args):
    scenario = _load(args.scenario)
    if scenario.race is None:
        raise ScenarioError(f"{args.scenario}: no [race] table")
    r = scenario.race
    sc = RaceScenario(
        track=r.track,
        ego_state=CarState.on_track(r.track, *r.ego_state),
        opp_state=CarState.on_track(r.track, *r.opp_state),
        params=r.params, ego_v_max=r.ego_v_max, opp_v_max=r.opp_v_max)
    alpha_ego = args.alpha if args.alpha is not None else r.alpha_ego
    out = simulate_closed_loop(sc, alpha_ego, r.alpha_opp_model,
                               r.horizon_seconds, _solver_options(args))
    rows = ["step,car,v,psi,s,e,X,Y"]
    for name, traj in (("ego", out.ego_trajectory), ("opp", out.opp_trajectory)):
        for k, st in enumerate(traj):
            rows.append(",".join([str(k), name] + [
                FLOAT_FMT % v for v in (st.v, st.psi, st.s, st.e, st.X, st.Y)]))
    doc = {"ego_won": out.ego_won, "final_progress": list(out.final_progress),
           "degraded_steps": out.degraded_steps,
           "statuses": out.statuses}
    _write_outputs(args, _manifest(args),
                   {"race.json": json.dumps(doc, indent=2) + "\n",
                    "trajectories.csv": "\n".join(rows) + "\n"})
    return EXIT_OK if out.clean else EXIT_NUMERICAL


def cmd_mc(args):
    scenario = _load(args.scenario)
    config = mc_config_from_scenario(scenario)
    n_runs = args.runs if args.runs is not None else \
        int(scenario.mc.get("runs", 100))
    seed = args.seed if args.seed is not None else \
        int(scenario.mc.get("seed", 0))

    def progress(i, rec):
        _log(f"run {i + 1}/{n_runs}: "
             f"norm={rec.win_normalized} aggr={rec.win_aggressive}")

    summary = run_mc(config, n_runs, seed, _solver_options(args),
                     progress, args.parallel)
    rows = ["run,ego_s0,opp_s0,ego_v0,opp_v0,ego_e0,opp_e0,"
            "win_normalized,win_aggressive,failed"]
    for rec in summary.records:
        rows.append(",".join(
            [str(rec.index)]
            + [FLOAT_FMT % v for v in (rec.ego_s0, rec.opp_s0, rec.ego_v0,
                                       rec.opp_v0, rec.ego_e0, rec.opp_e0)]
            + [str(rec.win_normalized), str(rec.win_aggressive),
               str(rec.failed)]))
    doc = {"n_runs": summary.n_runs, "n_valid": summary.n_valid,
           "n_failed": summary.n_failed,
           "win_rate_normalized": summary.win_rate_normalized,
           "win_rate_aggressive": summary.win_rate_aggressive}
    _write_outputs(args, _manifest(args, {"seed": seed, "runs": n_runs}),
                   {"summary.json": json.dumps(doc, indent=2) + "\n",
                    "verdicts.csv": "\n".join(rows) + "\n"})
    return EXIT_OK


def run_mc(config, n_runs, seed, options, progress, parallel):
    """Monte Carlo driver; run-level process parallelism when requested."""
    if not parallel or parallel <= 1 or n_runs <= 1:
        return monte_carlo(config, n_runs, seed, options, progress)
    from concurrent.futures import ProcessPoolExecutor
    from .racing.montecarlo import MonteCarloSummary, draw_initial_conditions
    import numpy as _np
    # pre-draw the paired initial conditions to keep determinism across
    # worker counts, then farm runs out one at a time
    rng = _np.random.default_rng(seed)
    draws = [draw_initial_conditions(config, rng) for _ in range(n_runs)]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        records = list(pool.map(_mc_one, [(config, i, d) for i, d in
                                          enumerate(draws)]))
    wins_norm = sum(int(bool(r.win_normalized)) for r in records if not r.failed)
    wins_aggr = sum(int(bool(r.win_aggressive)) for r in records if not r.failed)
    failed = sum(int(r.failed) for r in records)
    return MonteCarloSummary(n_runs=n_runs, n_valid=n_runs - failed,
                             n_failed=failed, wins_normalized=wins_norm,
                             wins_aggressive=wins_aggr, records=records)


def _mc_one(job):
    config, i, draw = job
    from .racing.montecarlo import RunRecord
    ego_s, opp_s, ego_v, opp_v, ego_e, opp_e = draw
    rec = RunRecord(i, ego_s, opp_s, ego_v, opp_v, ego_e, opp_e)
    sc = RaceScenario(
        track=config.track,
        ego_state=CarState.on_track(config.track, ego_v, 0.0, ego_s, ego_e),
        opp_state=CarState.on_track(config.track, opp_v, 0.0, opp_s, opp_e),
        params=config.params, ego_v_max=config.ego_v_max,
        opp_v_max=config.opp_v_max)
    out_n = simulate_closed_loop(sc, config.alpha_normalized, 1.0,
                                 config.horizon_seconds)
    out_a = simulate_closed_loop(sc, config.alpha_aggressive, 1.0,
                                 config.horizon_seconds)
    if not (out_n.clean and out_a.clean):
        rec.failed = True
    else:
        rec.win_normalized = out_n.ego_won
        rec.win_aggressive = out_a.ego_won
    return rec


def cmd_oracle(args):
    name = args.scenario
    alpha = args.alpha
    if name == "example1":
        if alpha is None:
            raise ScenarioError("oracle example1 needs --alpha in (0,1)")
        x, y = example1(alpha)
        doc = {"x": x, "y": y, "sigma": example1_sigma(alpha)}
    elif name == "three_car":
        if alpha is None:
            raise ScenarioError("oracle three_car needs --alpha in (0,1)")
        vec = three_car(alpha)
        doc = {"x1": vec[0], "v1": vec[1], "x2": vec[2], "v2": vec[3],
               "x3": vec[4], "v3": vec[5],
               "sigma": three_car_sigma(alpha, 1.0 - alpha)}
    elif name == "harker":
        if alpha is None:
            raise ScenarioError("oracle harker needs --alpha > 0")
        doc = {"candidates": [
            {"label": c.label, "x": list(c.x), "sigma": c.sigma,
             "shared_active": c.active} for c in harker(alpha)]}
    else:
        raise ScenarioError(f"unknown oracle '{name}' "
                            f"(have example1, three_car, harker)")
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="gnekit",
        description="Generalized Nash equilibrium toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    specs = [
        ("solve", cmd_solve, "solve one scaled game"),
        ("sweep", cmd_sweep, "trace equilibria over an alpha grid"),
        ("select", cmd_select, "bi-level equilibrium selection"),
        ("race", cmd_race, "closed-loop two-car race"),
        ("mc", cmd_mc, "paired-seed Monte Carlo study"),
        ("oracle", cmd_oracle, "print closed-form reference values"),
    ]
    for name, fn, help_ in specs:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("scenario",
                        help="scenario file or builtin game name")
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--rule",
                        choices=[r.value for r in FactorRule], default=None)
        sp.add_argument("--grid", default="0.1:0.9:0.1",
                        help="alpha grid lo:hi:step (sweep)")
        sp.add_argument("--runs", type=int, default=None)
        sp.add_argument("--seed", type=int,
                        default=0 if name != "mc" else None)
        sp.add_argument("--out", default=None,
                        help="output directory (default: stdout)")
        sp.add_argument("--parallel", type=int, default=None,
                        help="worker processes (mc only)")
        sp.add_argument("--tol", type=float, default=None)
        sp.set_defaults(func=fn)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
