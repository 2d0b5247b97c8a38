"""Two-car racing game over an N-step horizon.

Each car's decision block stacks states x_1..x_N (v, psi, s, e, X, Y) then
inputs u_0..u_{N-1} (u_a, u_delta). Dynamics are stage-wise equality
constraints; X, Y are tied to (s, e) through the track map so the
collision-avoidance coupling stays quadratic in the decision variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..assembly import assemble_scaled, solution_from_z
from ..functions import ConstraintBlock, QuadraticFunction
from ..game import FactorAssignment, FactorRule, PlayerSpec, build_game
from ..solver import (SolverOptions, continuation_solve, multistart_solve,
                      solve)
from .bicycle import (WHEELBASE, CarState, step_frenet, step_hessians,
                      step_jacobian)

NS = 6   # states per step
NU = 2   # inputs per step


@dataclass(frozen=True)
class RaceParams:
    horizon: int = 10
    dt: float = 0.1
    effort_weight: float = 0.1
    d_safe: float = 0.4
    v_max: tuple = (3.0, 3.0)
    a_max: float = 3.0
    delta_max: float = 0.4
    wheelbase: float = WHEELBASE

    def __post_init__(self):
        if self.horizon < 1 or self.dt <= 0 or self.d_safe <= 0:
            raise ValueError("invalid race parameters")

    @property
    def block_dim(self):
        return (NS + NU) * self.horizon


def _state_idx(k, comp, N):
    """Index of state component comp at step k (1..N) inside a car block."""
    return NS * (k - 1) + comp


def _input_idx(k, comp, N):
    return NS * N + NU * k + comp


def _dynamics_block(track, x0, params):
    """Equality block h(x_car) = 0 of size 6N over one car's 8N variables."""
    N, dt, wb = params.horizon, params.dt, params.wheelbase
    dim = params.block_dim
    x0_frenet = np.array([x0.v, x0.psi, x0.s, x0.e])

    def split(xc):
        states = xc[: NS * N].reshape(N, NS)
        inputs = xc[NS * N:].reshape(N, NU)
        return states, inputs

    def prev4(states):
        return np.vstack([x0_frenet, states[:-1, :4]])

    def value(xc):
        states, inputs = split(xc)
        f4 = step_frenet(prev4(states), inputs, track, dt, wb)
        px, py = track.to_inertial(states[:, 2], states[:, 3])
        out = np.empty((N, NS))
        out[:, :4] = states[:, :4] - f4
        out[:, 4] = states[:, 4] - px
        out[:, 5] = states[:, 5] - py
        return out.reshape(-1)

    def jac(xc):
        states, inputs = split(xc)
        J = np.zeros((NS * N, dim))
        J4 = step_jacobian(prev4(states), inputs, track, dt, wb)
        Jp = track.position_jacobian(states[:, 2], states[:, 3])
        for k in range(N):
            r = NS * k
            for c in range(4):
                J[r + c, NS * k + c] = 1.0
            if k > 0:
                J[r: r + 4, NS * (k - 1): NS * (k - 1) + 4] -= J4[k, :, :4]
            J[r: r + 4, NS * N + NU * k: NS * N + NU * (k + 1)] -= J4[k, :, 4:6]
            J[r + 4, NS * k + 4] = 1.0
            J[r + 4, NS * k + 2: NS * k + 4] = -Jp[k, 0]
            J[r + 5, NS * k + 5] = 1.0
            J[r + 5, NS * k + 2: NS * k + 4] = -Jp[k, 1]
        return J

    def hess_combo(xc, w):
        states, inputs = split(xc)
        H = np.zeros((dim, dim))
        wk = w.reshape(N, NS)
        Hrows = step_hessians(prev4(states), inputs, track, dt, wb)
        HX, HY = track.position_hessians(states[:, 2], states[:, 3])
        for k in range(N):
            # local order (v,psi,s,e, u_a,u_d) -> global indices
            if np.any(wk[k, :4] != 0.0):
                Hloc = -np.einsum("c,cab->ab", wk[k, :4], Hrows[k])
                iu = NS * N + NU * k
                if k > 0:
                    ip = NS * (k - 1)
                    H[ip: ip + 4, ip: ip + 4] += Hloc[:4, :4]
                    H[ip: ip + 4, iu: iu + 2] += Hloc[:4, 4:]
                    H[iu: iu + 2, ip: ip + 4] += Hloc[4:, :4]
                H[iu: iu + 2, iu: iu + 2] += Hloc[4:, 4:]
            # map rows: -(w4 HX + w5 HY) over (s_{k+1}, e_{k+1})
            if wk[k, 4] != 0.0 or wk[k, 5] != 0.0:
                Hm = -(wk[k, 4] * HX[k] + wk[k, 5] * HY[k])
                i0 = NS * k + 2
                H[i0: i0 + 2, i0: i0 + 2] += Hm
        return H

    return ConstraintBlock(dim, NS * N, value, jac, hess_combo)


def _make_box(params, v_max, half_width):
    N = params.horizon
    dim = params.block_dim
    A = []
    b = []
    for k in range(1, N + 1):
        for comp, hi in ((3, half_width), (0, v_max)):
            row = np.zeros(dim)
            row[_state_idx(k, comp, N)] = 1.0
            A.append(row)
            b.append(-hi)
            row = -row
            A.append(row.copy())
            b.append(-half_width if comp == 3 else 0.0)
    for k in range(N):
        for comp, hi in ((0, params.a_max), (1, params.delta_max)):
            row = np.zeros(dim)
            row[_input_idx(k, comp, N)] = 1.0
            A.append(row)
            b.append(-hi)
            A.append(-row)
            b.append(-hi)
    A = np.vstack(A)
    b = np.asarray(b)

    def value(xc):
        return A @ xc + b

    def jac(xc):
        return A

    def hess_combo(xc, w):
        return np.zeros((dim, dim))

    return ConstraintBlock(dim, A.shape[0], value, jac, hess_combo)


def _collision_block(params, n_full, d2_bounds=None):
    """Shared constraints d2_k - |p1_k - p2_k|^2 <= 0, k = 1..N-1.

    ``d2_bounds`` holds the per-step squared distance bound (default
    d_safe^2 everywhere); the first step's bound may be relaxed because
    the step-1 positions are fixed by the current states under the
    explicit-Euler dynamics, so an unattainable bound there would make
    the whole game infeasible with no control able to repair it.
    """
    N = params.horizon
    nb = params.block_dim
    d2 = (np.full(N - 1, params.d_safe ** 2) if d2_bounds is None
          else np.asarray(d2_bounds, dtype=float))
    ks = np.arange(1, N)
    ix1 = np.array([_state_idx(k, 4, N) for k in ks])
    iy1 = ix1 + 1
    ix2 = ix1 + nb
    iy2 = iy1 + nb

    def value(x):
        dX = x[ix1] - x[ix2]
        dY = x[iy1] - x[iy2]
        return d2 - dX ** 2 - dY ** 2

    def jac(x):
        J = np.zeros((N - 1, n_full))
        dX = x[ix1] - x[ix2]
        dY = x[iy1] - x[iy2]
        r = np.arange(N - 1)
        J[r, ix1] = -2.0 * dX
        J[r, ix2] = 2.0 * dX
        J[r, iy1] = -2.0 * dY
        J[r, iy2] = 2.0 * dY
        return J

    def hess_combo(x, w):
        H = np.zeros((n_full, n_full))
        for j, wj in enumerate(w):
            if wj == 0.0:
                continue
            for ia, ib in ((ix1[j], ix2[j]), (iy1[j], iy2[j])):
                H[ia, ia] += -2.0 * wj
                H[ib, ib] += -2.0 * wj
                H[ia, ib] += 2.0 * wj
                H[ib, ia] += 2.0 * wj
        return H

    return ConstraintBlock(n_full, N - 1, value, jac, hess_combo)


def _race_cost(params, player, n_full):
    """-s_N(own) + s_N(other) + (beta/2) sum ||u_own||^2 as a quadratic."""
    N = params.horizon
    nb = params.block_dim
    own = player * nb
    other = (1 - player) * nb
    Q = np.zeros((n_full, n_full))
    for k in range(N):
        for comp in range(NU):
            i = own + _input_idx(k, comp, N)
            Q[i, i] = params.effort_weight
    q = np.zeros(n_full)
    q[own + _state_idx(N, 2, N)] = -1.0
    q[other + _state_idx(N, 2, N)] = 1.0
    return QuadraticFunction(Q, q)


def build_race_game(track, states, params=None, alpha=1.0):
    """GameSpec + FactorAssignment (A_1 = I, A_2 = alpha*I) for one horizon.

    ``states`` is the pair of current CarState; player order follows it.
    Raises if the cars already violate the safety distance.
    """
    params = params or RaceParams()
    if alpha <= 0.0:
        raise ValueError("alpha must be strictly positive")
    s1, s2 = states
    if (s1.X - s2.X) ** 2 + (s1.Y - s2.Y) ** 2 < (0.5 * params.d_safe) ** 2:
        raise ValueError("initial states violate the safety distance")
    n_full = 2 * params.block_dim
    players = []
    for i, st in enumerate((s1, s2)):
        dyn = _dynamics_block(track, st, params)
        box = _make_box(params, params.v_max[i], track.half_width)
        cost = _race_cost(params, i, n_full)
        players.append(PlayerSpec(params.block_dim, cost,
                                  eq_constraints=[dyn], ineq_constraints=[box]))
    shared = []
    if params.horizon > 1:
        # step-1 positions are control-independent: relax that bound to the
        # value the dynamics will produce anyway, so near-contact states
        # (reached when the two cars' models of each other disagree) do not
        # make the game infeasible or its KKT system degenerate.
        p1 = []
        for st in (s1, s2):
            nxt = step_frenet(st.frenet(), np.zeros(NU), track,
                              params.dt, params.wheelbase)
            p1.append(track.to_inertial(nxt[2], nxt[3]))
        d1_sq = (p1[0][0] - p1[1][0]) ** 2 + (p1[0][1] - p1[1][1]) ** 2
        d2_bounds = np.full(params.horizon - 1, params.d_safe ** 2)
        d2_bounds[0] = min(d2_bounds[0], d1_sq - 1e-6)
        shared = [_collision_block(params, n_full, d2_bounds)]
    game = build_game(players, shared)
    m0 = game.m0
    if m0:
        factors = FactorAssignment((np.ones(m0), np.full(m0, float(alpha))),
                                   FactorRule.FIRST_PLAYER_IDENTITY)
    else:
        factors = FactorAssignment((np.zeros(0), np.zeros(0)))
    return game, factors


def rollout_zero_input(track, state, params):
    """Coasting rollout (zero inputs) used to seed cold starts."""
    N, dt, wb = params.horizon, params.dt, params.wheelbase
    xc = np.zeros(params.block_dim)
    x4 = np.array([state.v, state.psi, state.s, state.e])
    for k in range(1, N + 1):
        x4 = step_frenet(x4, np.zeros(2), track, dt, wb)
        xc[NS * (k - 1): NS * (k - 1) + 4] = x4
        X, Y = track.to_inertial(x4[2], x4[3])
        xc[NS * (k - 1) + 4] = X
        xc[NS * (k - 1) + 5] = Y
    return xc


def race_cold_start(track, states, params, layout):
    """Pack a feasible-ish starting point: coasting rollouts, zero duals.

    Zero multipliers keep the start clear of the Fischer-Burmeister kink
    manifold that small positive duals on far-from-active bounds create.
    """
    x = np.concatenate([rollout_zero_input(track, st, params) for st in states])
    mus = [np.zeros(sl.stop - sl.start) for sl in layout.mu_slices]
    lams = [np.zeros(sl.stop - sl.start) for sl in layout.lam_slices]
    sigma = np.zeros(layout.sigma_slices[0].stop - layout.sigma_slices[0].start)
    return layout.pack(x, mus, lams, sigma)


def restored_start(track, states, params, z, layout):
    """Re-roll each car's dynamics under the inputs of a stacked iterate.

    The resulting start satisfies the dynamics equalities exactly and has
    zero multipliers, which pulls Newton off stalled complementarity
    branches that the iterate's own states and duals would pin it to.
    """
    N, nb = params.horizon, params.block_dim
    dt, wb = params.dt, params.wheelbase
    z = np.asarray(z, dtype=float)
    x = np.zeros(2 * nb)
    for car, st in enumerate(states):
        off = car * nb
        inputs = z[off + NS * N: off + nb].reshape(N, NU)
        x4 = st.frenet()
        rows = np.zeros((N, NS))
        for k in range(N):
            x4 = step_frenet(x4, inputs[k], track, dt, wb)
            rows[k, :4] = x4
            rows[k, 4], rows[k, 5] = track.to_inertial(x4[2], x4[3])
        x[off: off + NS * N] = rows.reshape(-1)
        x[off + NS * N: off + nb] = inputs.reshape(-1)
    mus = [np.zeros(sl.stop - sl.start) for sl in layout.mu_slices]
    lams = [np.zeros(sl.stop - sl.start) for sl in layout.lam_slices]
    sigma = np.zeros(layout.sigma_slices[0].stop - layout.sigma_slices[0].start)
    return layout.pack(x, mus, lams, sigma)


def solve_step(game, factors, track=None, states=None, params=None,
               warm_start=None, options=None, seeds=(1, 2, 3)):
    """Solve one horizon game, escalating through fallback starts.

    Order, cheapest first: warm start; warm start with inequality duals
    cleared; dynamics-restored rollout of the stalled iterate's inputs;
    continuation from the coasting cold start; the normalized (alpha = 1)
    game continued to the target alpha; random perturbations of the cold
    start. Without track/states/params only the warm and generic
    multistart paths are available.
    """
    opts = options or SolverOptions(max_iters=120)
    quick = replace(opts, restarts=0)
    inst = assemble_scaled(game, factors)
    have_rollouts = (track is not None and states is not None
                     and params is not None)
    cold = race_cold_start(track, states, params, inst.layout) \
        if have_rollouts else None
    report = None

    if warm_start is not None:
        report = solve(inst, quick, warm_start)
        if not report.converged:
            # stale shifted inequality duals often pin the iterate on a
            # degenerate complementarity branch; retry with them cleared
            wz = np.asarray(warm_start, dtype=float).copy()
            for sl in list(inst.layout.lam_slices) + list(inst.layout.sigma_slices):
                wz[sl] = 0.0
            report = solve(inst, quick, wz)
        if not report.converged and have_rollouts:
            zr = restored_start(track, states, params, report.z, inst.layout)
            report = solve(inst, quick, zr)

    if report is None or not report.converged:
        if cold is not None:
            r2 = continuation_solve(inst, opts, cold)
            if r2.converged:
                report = r2
            if report is None:
                report = r2
        else:
            r2 = multistart_solve(inst, opts, seeds=seeds,
                                  initial_guess=warm_start)
            if r2.converged or report is None:
                report = r2

    alpha2 = float(factors.diagonals[1][0]) if factors.diagonals[1].size else 1.0
    if not report.converged and have_rollouts and alpha2 != 1.0:
        # the normalized game shares this game's solution whenever the
        # collision constraints end up inactive, and its merit landscape
        # avoids some local minima the scaled one funnels into
        ng, nf = build_race_game(track, states, params, 1.0)
        ninst = assemble_scaled(ng, nf)
        nrep = solve(ninst, quick, warm_start) if warm_start is not None \
            else solve(ninst, quick, cold)
        if not nrep.converged:
            nrep = continuation_solve(ninst, opts, cold)
        if nrep.converged:
            r3 = solve(inst, quick, nrep.z)
            if r3.converged:
                report = r3

    if not report.converged and cold is not None:
        # random perturbations of the coasting rollout reach basins the
        # deterministic chain misses; full-random starts rarely do at
        # this dimension
        hi = np.where(np.isfinite(inst.upper), inst.upper, np.inf)
        for seed in seeds:
            rng = np.random.default_rng(seed)
            z0 = np.clip(cold + rng.normal(0.0, 0.3, size=inst.dim),
                         inst.lower, hi)
            r4 = solve(inst, replace(opts, restarts=0, max_iters=120), z0)
            if r4.converged:
                report = r4
                break

    sol = solution_from_z(game, inst.layout, report.z, factors) if report.converged else None
    return sol, report, inst
