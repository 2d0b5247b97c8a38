"""Paired-seed Monte Carlo comparison of racing strategies.

Each run draws one set of initial conditions and replays it under both ego
strategies (normalized alpha = 1 and an aggressive alpha), so the win-rate
difference is a paired comparison. Fully deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bicycle import CarState
from .game import RaceParams
from .sim import RaceScenario, simulate_closed_loop
from .track import Track, l_shaped_track


@dataclass
class MonteCarloConfig:
    track: Track = field(default_factory=l_shaped_track)
    params: RaceParams = field(default_factory=RaceParams)
    ego_v_max: float = 3.0
    opp_v_max: float = 2.85
    alpha_aggressive: float = 0.05
    alpha_normalized: float = 1.0
    horizon_seconds: float = 2.0
    # randomization ranges
    opp_position: tuple = None            # defaults to (0, track length)
    ego_rel_position: tuple = (-1.75, -1.5)
    opp_speed: tuple = (1.0, 2.0)
    ego_rel_speed: tuple = (0.25, 0.75)
    ego_lateral_frac: tuple = (-1.0 / 3.0, 1.0 / 3.0)     # of half width
    opp_rel_lateral_frac: tuple = (-1.0 / 8.0, 1.0 / 8.0)


@dataclass
class RunRecord:
    index: int
    ego_s0: float
    opp_s0: float
    ego_v0: float
    opp_v0: float
    ego_e0: float
    opp_e0: float
    win_normalized: bool = None
    win_aggressive: bool = None
    failed: bool = False


@dataclass
class MonteCarloSummary:
    n_runs: int
    n_valid: int
    n_failed: int
    wins_normalized: int
    wins_aggressive: int
    records: list
    solve_times: list = field(default_factory=list)   # seconds, every solve

    @property
    def median_solve_time(self):
        return float(np.median(self.solve_times)) if self.solve_times else float("nan")

    @property
    def win_rate_normalized(self):
        return self.wins_normalized / self.n_valid if self.n_valid else float("nan")

    @property
    def win_rate_aggressive(self):
        return self.wins_aggressive / self.n_valid if self.n_valid else float("nan")


def draw_initial_conditions(config, rng):
    H = config.track.half_width
    lo, hi = config.opp_position or (0.0, config.track.length)
    opp_s = rng.uniform(lo, hi)
    ego_s = opp_s + rng.uniform(*config.ego_rel_position)
    opp_v = rng.uniform(*config.opp_speed)
    ego_v = opp_v + rng.uniform(*config.ego_rel_speed)
    ego_e = rng.uniform(config.ego_lateral_frac[0] * H,
                        config.ego_lateral_frac[1] * H)
    opp_e = ego_e + rng.uniform(config.opp_rel_lateral_frac[0] * H,
                                config.opp_rel_lateral_frac[1] * H)
    opp_e = float(np.clip(opp_e, -H, H))
    return ego_s, opp_s, ego_v, opp_v, ego_e, opp_e


def monte_carlo(config=None, n_runs=100, seed=0, options=None, progress=None):
    """Run paired simulations and tabulate win percentages.

    Runs where either arm degrades (solver failure or infeasible start) are
    excluded from the win-rate denominator and counted separately.
    """
    config = config or MonteCarloConfig()
    records = []
    solve_times = []
    wins_norm = wins_aggr = failed = 0
    rng = np.random.default_rng(seed)
    for i in range(int(n_runs)):
        ego_s, opp_s, ego_v, opp_v, ego_e, opp_e = draw_initial_conditions(config, rng)
        rec = RunRecord(i, ego_s, opp_s, ego_v, opp_v, ego_e, opp_e)
        scenario = RaceScenario(
            track=config.track,
            ego_state=CarState.on_track(config.track, ego_v, 0.0, ego_s, ego_e),
            opp_state=CarState.on_track(config.track, opp_v, 0.0, opp_s, opp_e),
            params=config.params,
            ego_v_max=config.ego_v_max,
            opp_v_max=config.opp_v_max,
        )
        out_norm = simulate_closed_loop(scenario, config.alpha_normalized,
                                        1.0, config.horizon_seconds, options)
        out_aggr = simulate_closed_loop(scenario, config.alpha_aggressive,
                                        1.0, config.horizon_seconds, options)
        solve_times.extend(out_norm.solve_times)
        solve_times.extend(out_aggr.solve_times)
        if not (out_norm.clean and out_aggr.clean):
            rec.failed = True
            failed += 1
        else:
            rec.win_normalized = out_norm.ego_won
            rec.win_aggressive = out_aggr.ego_won
            wins_norm += int(out_norm.ego_won)
            wins_aggr += int(out_aggr.ego_won)
        records.append(rec)
        if progress is not None:
            progress(i, rec)
    n_valid = len(records) - failed
    return MonteCarloSummary(n_runs=int(n_runs), n_valid=n_valid,
                             n_failed=failed, wins_normalized=wins_norm,
                             wins_aggressive=wins_aggr, records=records,
                             solve_times=solve_times)
