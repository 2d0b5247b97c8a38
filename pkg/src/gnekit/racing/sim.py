"""Closed-loop racing: each car re-solves its horizon game every time step,
applies its first input, and the world advances by the bicycle dynamics.

Each car carries its own aggressiveness model: it solves the game with
itself as player 2 and factor alpha_self (the opponent is modeled as
player 1 with the identity factor).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..solver import SolverOptions
from .bicycle import CarInput, CarState, bicycle_step, step_frenet
from .game import (NS, NU, RaceParams, build_race_game, race_cold_start,
                   solve_step)
from .track import Track


@dataclass
class RaceScenario:
    track: Track
    ego_state: CarState
    opp_state: CarState
    params: RaceParams = field(default_factory=RaceParams)
    ego_v_max: float = 3.0
    opp_v_max: float = 2.85


@dataclass
class RaceOutcome:
    ego_trajectory: list
    opp_trajectory: list
    statuses: list                  # per step, per car solver status strings
    ego_won: bool
    final_progress: tuple           # (ego s, opp s)
    degraded_steps: int = 0
    solve_times: list = field(default_factory=list)  # seconds, one per solve

    @property
    def clean(self):
        return self.degraded_steps == 0


def _shift_warm(z, params, track):
    """Shift a horizon solution one step forward for warm starting."""
    N = params.horizon
    nb = params.block_dim
    z = np.asarray(z, dtype=float).copy()
    n = 2 * nb
    for car in range(2):
        off = car * nb
        states = z[off: off + NS * N].reshape(N, NS).copy()
        inputs = z[off + NS * N: off + nb].reshape(N, NU).copy()
        states[:-1] = states[1:]
        inputs[:-1] = inputs[1:]
        x4 = step_frenet(states[-2, :4] if N > 1 else states[-1, :4],
                         inputs[-1], track, params.dt, params.wheelbase)
        states[-1, :4] = x4
        states[-1, 4], states[-1, 5] = track.to_inertial(x4[2], x4[3])
        z[off: off + NS * N] = states.reshape(-1)
        z[off + NS * N: off + nb] = inputs.reshape(-1)
    # equality multipliers (6 per step per car)
    base = n
    for car in range(2):
        mu = z[base: base + NS * N].reshape(N, NS).copy()
        mu[:-1] = mu[1:]
        z[base: base + NS * N] = mu.reshape(-1)
        base += NS * N
    # inequality multipliers (4 per state step, then 4 per input step)
    for car in range(2):
        lam_s = z[base: base + 4 * N].reshape(N, 4).copy()
        lam_s[:-1] = lam_s[1:]
        z[base: base + 4 * N] = lam_s.reshape(-1)
        base += 4 * N
        lam_u = z[base: base + 4 * N].reshape(N, 4).copy()
        lam_u[:-1] = lam_u[1:]
        z[base: base + 4 * N] = lam_u.reshape(-1)
        base += 4 * N
    if N > 1:
        sig = z[base: base + (N - 1)].copy()
        sig[:-1] = sig[1:]
        z[base: base + (N - 1)] = sig
    return z


def _fallback_input(state, track, params):
    """Lane-keeping, gently braking input applied when a solve fails.

    Holding the last optimized input would keep the car accelerating and
    turning blindly (off the track within a few steps in a corner); this
    steers toward the center line and sheds speed until solves recover.
    """
    kappa = track.curvature(state.s)
    s_dot = state.v * np.cos(state.psi) / (1.0 - state.e * kappa)
    heading_rate = kappa * s_dot + 2.0 * (-0.5 * state.e - state.psi)
    if state.v > 1e-6:
        delta = float(np.arctan(params.wheelbase * heading_rate / state.v))
    else:
        delta = 0.0
    delta = float(np.clip(delta, -params.delta_max, params.delta_max))
    u_a = -1.0 if state.v > 0.5 else 0.0
    return CarInput(u_a, delta)


def _first_input(sol, params, player=1):
    """First input of the given player from a stacked solution."""
    nb = params.block_dim
    off = player * nb + NS * params.horizon
    return CarInput(float(sol.x[off]), float(sol.x[off + 1]))


def simulate_closed_loop(scenario, alpha_ego=1.0, alpha_opp_model=1.0,
                         T=2.0, options=None):
    """Run a T-second race; returns the RaceOutcome.

    Per step, each car solves the game (opponent as player 1 with identity
    factor, itself as player 2 with its alpha) and applies its own first
    input. On a failed solve the car applies a lane-keeping braking
    fallback and the outcome is flagged degraded.
    """
    p = scenario.params
    n_steps = int(round(T / p.dt))
    track = scenario.track
    ego = scenario.ego_state
    opp = scenario.opp_state
    ego_traj = [ego]
    opp_traj = [opp]
    statuses = []
    solve_times = []
    degraded = 0
    warm = {"ego": None, "opp": None}
    last_input = {"ego": CarInput(0.0, 0.0), "opp": CarInput(0.0, 0.0)}
    opts = options or SolverOptions(tol_residual=1e-7, max_iters=80, restarts=1)

    for _ in range(n_steps):
        step_status = {}
        for name, alpha, self_state, other_state, self_vmax, other_vmax in (
                ("ego", alpha_ego, ego, opp, scenario.ego_v_max, scenario.opp_v_max),
                ("opp", alpha_opp_model, opp, ego, scenario.opp_v_max, scenario.ego_v_max)):
            params_c = replace(p, v_max=(other_vmax, self_vmax))
            try:
                t0 = time.perf_counter()
                game, factors = build_race_game(track, (other_state, self_state),
                                                params_c, alpha)
                sol, report, inst = solve_step(
                    game, factors, track=track,
                    states=(other_state, self_state), params=params_c,
                    warm_start=warm[name], options=opts)
                solve_times.append(time.perf_counter() - t0)
                step_status[name] = report.status.value
                if sol is not None:
                    last_input[name] = _first_input(sol, params_c, player=1)
                    warm[name] = _shift_warm(report.z, params_c, track)
                else:
                    degraded += 1
                    last_input[name] = _fallback_input(self_state, track, p)
                    warm[name] = None
            except ValueError:
                # infeasible start (e.g. safety distance already violated)
                step_status[name] = "infeasible-start"
                degraded += 1
                last_input[name] = _fallback_input(self_state, track, p)
                warm[name] = None
        statuses.append(step_status)
        ego, _ = bicycle_step(ego, last_input["ego"], track, p.dt, p.wheelbase)
        opp, _ = bicycle_step(opp, last_input["opp"], track, p.dt, p.wheelbase)
        ego_traj.append(ego)
        opp_traj.append(opp)

    return RaceOutcome(ego_trajectory=ego_traj, opp_trajectory=opp_traj,
                       statuses=statuses, ego_won=bool(ego.s > opp.s),
                       final_progress=(ego.s, opp.s), degraded_steps=degraded,
                       solve_times=solve_times)
