"""Damped semismooth Newton for box-constrained MCPs.

The complementarity conditions are recast through the Fischer-Burmeister
function phi(a, b) = a + b - sqrt(a^2 + b^2):
  * lower bound only:  Phi_j = phi(z_j - l_j, F_j)
  * upper bound only:  Phi_j = -phi(u_j - z_j, -F_j)
  * both bounds:       Phi_j = phi(z_j - l_j, -phi(u_j - z_j, -F_j))
  * free:              Phi_j = F_j
Phi(z) = 0 is equivalent to the MCP conditions. Newton steps on an element
of the generalized Jacobian with an Armijo backtracking line search on the
merit 0.5*||Phi||^2, with diagonal regularization escalated on breakdown.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    SINGULAR = "singular"
    DIVERGED = "diverged"
    NONE_CONVERGED = "none-converged"


@dataclass
class SolverOptions:
    tol_residual: float = 1e-8
    max_iters: int = 200
    backtrack: float = 0.5
    armijo: float = 1e-4
    reg_floor: float = 1e-10
    restarts: int = 5
    divergence_limit: float = 1e8
    min_step: float = 1e-14
    stall_patience: int = 8   # iterations without 20% improvement before bailing

    def __post_init__(self):
        if self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (0 < self.backtrack < 1 and 0 < self.armijo < 1):
            raise ValueError("line-search factors must lie in (0,1)")


@dataclass
class SolveReport:
    status: SolveStatus
    iterations: int
    fb_residual: float
    kkt_residual: float
    z: np.ndarray
    basins: list = field(default_factory=list)   # distinct converged z's (multistart)

    @property
    def converged(self):
        return self.status is SolveStatus.CONVERGED


def fb_compose(a, b, mu=0.0):
    """Fischer-Burmeister: a + b - sqrt(a^2 + b^2 + 2 mu).

    With mu = 0 this is zero iff a, b >= 0 and ab = 0; mu > 0 gives the
    smoothed version whose zero set is the central path a, b > 0, ab = mu.
    """
    if mu:
        return a + b - np.sqrt(a * a + b * b + 2.0 * mu)
    return a + b - np.hypot(a, b)


def _fb_partials(a, b, mu=0.0):
    """Partials of fb_compose; Clarke element (1 - 1/sqrt(2)) at the kink."""
    r = np.sqrt(a * a + b * b + 2.0 * mu) if mu else np.hypot(a, b)
    kink = r < 1e-14
    safe = np.where(kink, 1.0, r)
    da = 1.0 - a / safe
    db = 1.0 - b / safe
    c = 1.0 - 1.0 / np.sqrt(2.0)
    da = np.where(kink, c, da)
    db = np.where(kink, c, db)
    return da, db


class _FBSystem:
    """Semismooth reformulation Phi and its generalized Jacobian.

    ``mu > 0`` switches to the smoothed Fischer-Burmeister system used by
    the continuation fallback; mu = 0 is the exact reformulation.
    """

    def __init__(self, instance, mu=0.0):
        self.inst = instance
        self.mu = float(mu)
        lo, hi = instance.lower, instance.upper
        self.has_lo = np.isfinite(lo)
        self.has_hi = np.isfinite(hi)
        self.free = ~self.has_lo & ~self.has_hi
        self.lo_only = self.has_lo & ~self.has_hi
        self.hi_only = ~self.has_lo & self.has_hi
        self.both = self.has_lo & self.has_hi

    def phi(self, z, Fz=None):
        if Fz is None:
            Fz = self.inst.F(z)
        lo, hi = self.inst.lower, self.inst.upper
        mu = self.mu
        out = Fz.copy()
        m = self.lo_only
        if m.any():
            out[m] = fb_compose(z[m] - lo[m], Fz[m], mu)
        m = self.hi_only
        if m.any():
            out[m] = -fb_compose(hi[m] - z[m], -Fz[m], mu)
        m = self.both
        if m.any():
            inner = -fb_compose(hi[m] - z[m], -Fz[m], mu)
            out[m] = fb_compose(z[m] - lo[m], inner, mu)
        return out, Fz

    def jacobian(self, z, Fz):
        J = self.inst.jac(z)
        lo, hi = self.inst.lower, self.inst.upper
        mu = self.mu
        d = self.inst.dim
        Dz = np.zeros(d)   # coefficient on e_j
        Df = np.ones(d)    # coefficient on row j of J
        m = self.lo_only
        if m.any():
            da, db = _fb_partials(z[m] - lo[m], Fz[m], mu)
            Dz[m] = da
            Df[m] = db
        m = self.hi_only
        if m.any():
            da, db = _fb_partials(hi[m] - z[m], -Fz[m], mu)
            Dz[m] = da     # -phi => d/dz = -da * (-1) = da
            Df[m] = db     # -phi => d/dF = -db * (-1) = db
        m = self.both
        if m.any():
            inner = -fb_compose(hi[m] - z[m], -Fz[m], mu)
            da_i, db_i = _fb_partials(hi[m] - z[m], -Fz[m], mu)
            da_o, db_o = _fb_partials(z[m] - lo[m], inner, mu)
            # d inner/dz = da_i, d inner/dF = db_i
            Dz[m] = da_o + db_o * da_i
            Df[m] = db_o * db_i
        Jphi = Df[:, None] * J
        Jphi[np.arange(d), np.arange(d)] += Dz
        return Jphi


def default_start(instance):
    """x free entries at 0, lower-bounded multipliers at l + 0.1 (off the
    origin kink), doubly bounded at the midpoint."""
    lo, hi = instance.lower, instance.upper
    z = np.zeros(instance.dim)
    m = np.isfinite(lo) & ~np.isfinite(hi)
    z[m] = lo[m] + 0.1
    m = ~np.isfinite(lo) & np.isfinite(hi)
    z[m] = hi[m] - 0.1
    m = np.isfinite(lo) & np.isfinite(hi)
    z[m] = 0.5 * (lo[m] + hi[m])
    return z


def natural_residual(instance, z, Fz=None):
    """inf-norm of z - clip(z - F(z), l, u); zero exactly at MCP solutions."""
    if Fz is None:
        Fz = instance.F(z)
    proj = np.clip(z - Fz, instance.lower, instance.upper)
    return float(np.max(np.abs(z - proj))) if z.size else 0.0


def solve(instance, options=None, initial_guess=None):
    """Solve one MCP instance from one starting point."""
    opts = options or SolverOptions()
    sys_ = _FBSystem(instance)
    if initial_guess is not None:
        z = np.asarray(initial_guess, dtype=float).copy()
        if z.size != instance.dim:
            raise ValueError("initial guess has wrong dimension")
    else:
        z = default_start(instance)

    rng = np.random.default_rng(0)
    best = None
    for attempt in range(opts.restarts + 1):
        report = _newton_loop(instance, sys_, z, opts)
        if report.converged:
            return report
        if best is None or report.fb_residual < best.fb_residual:
            best = report
        # restart from a perturbed clip of the best iterate
        z = np.clip(best.z + rng.normal(0.0, 0.5, size=instance.dim),
                    np.where(np.isfinite(instance.lower), instance.lower, -np.inf),
                    np.where(np.isfinite(instance.upper), instance.upper, np.inf))
    return best


def _line_search(sys_, z, phi, step, merit, slope, opts, max_backtracks):
    """Armijo backtracking; returns (accepted, z_new, phi_new, F_new)."""
    t = 1.0
    for _ in range(max_backtracks):
        z_new = z + t * step
        phi_new, F_new = sys_.phi(z_new)
        merit_new = 0.5 * float(phi_new @ phi_new)
        if np.isfinite(merit_new) and merit_new <= merit + opts.armijo * t * slope:
            return True, z_new, phi_new, F_new
        t *= opts.backtrack
        if t < opts.min_step:
            break
    return False, z, phi, None


def _newton_loop(instance, sys_, z, opts, tol=None):
    tol = opts.tol_residual if tol is None else tol
    z = z.copy()
    phi, Fz = sys_.phi(z)
    res = float(np.max(np.abs(phi))) if phi.size else 0.0
    status = SolveStatus.MAX_ITERS
    eye = np.eye(instance.dim)
    lm = 1e-4   # Levenberg-Marquardt damping carried across iterations
    stall_res = res
    stall_count = 0
    it = 0
    for it in range(1, opts.max_iters + 1):
        if res <= tol:
            status = SolveStatus.CONVERGED
            it -= 1
            break
        if not np.isfinite(res) or res > opts.divergence_limit:
            status = SolveStatus.DIVERGED
            break
        # stall detector: bail early when the residual stops improving, so
        # the caller's fallbacks (smoothing, barrier, restarts) kick in
        if res > 0.8 * stall_res:
            stall_count += 1
            if stall_count >= opts.stall_patience:
                break
        else:
            stall_res = res
            stall_count = 0
        J = sys_.jacobian(z, Fz)
        merit = 0.5 * float(phi @ phi)
        grad_merit = J.T @ phi
        accepted = False

        # 1) damped Newton step on Phi; reject huge or ascent directions
        step = None
        try:
            A = J + opts.reg_floor * eye
            lu = lu_factor(A, check_finite=False)
            step = lu_solve(lu, -phi, check_finite=False)
            # one pass of iterative refinement on the same factorization
            step -= lu_solve(lu, A @ step + phi, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            step = None
        if step is not None and np.all(np.isfinite(step)):
            slope = float(grad_merit @ step)
            cap = 1e3 * (1.0 + float(np.linalg.norm(z)))
            if slope < 0.0 and float(np.linalg.norm(step)) <= cap:
                accepted, z_new, phi_new, F_new = _line_search(
                    sys_, z, phi, step, merit, slope, opts, max_backtracks=15)

        # 2) fallback: Levenberg-Marquardt on the merit (guaranteed descent)
        if not accepted:
            gnorm = float(np.linalg.norm(grad_merit))
            if gnorm <= 1e-14:
                break   # merit-stationary but not a root: give up, restart
            JtJ = J.T @ J
            for _ in range(12):
                try:
                    step = np.linalg.solve(JtJ + lm * eye, -grad_merit)
                except np.linalg.LinAlgError:
                    lm *= 10.0
                    continue
                slope = float(grad_merit @ step)
                if slope < 0.0 and np.all(np.isfinite(step)):
                    accepted, z_new, phi_new, F_new = _line_search(
                        sys_, z, phi, step, merit, slope, opts,
                        max_backtracks=20)
                    if accepted:
                        lm = max(0.3 * lm, 1e-10)
                        break
                lm *= 10.0
            if not accepted:
                break   # stalled; outer restart loop perturbs and retries
        z, phi, Fz = z_new, phi_new, F_new
        res = float(np.max(np.abs(phi))) if phi.size else 0.0
    else:
        it = opts.max_iters
    if status is not SolveStatus.CONVERGED and res <= tol:
        status = SolveStatus.CONVERGED
    return SolveReport(status=status, iterations=it, fb_residual=res,
                       kkt_residual=natural_residual(instance, z, Fz), z=z)


def _smoothing_pass(instance, opts, z0):
    """Fischer-Burmeister smoothing continuation: trace the central path by
    solving the mu-smoothed system for a decreasing mu schedule, then polish
    with the exact semismooth system."""
    stage_opts = SolverOptions(
        tol_residual=opts.tol_residual, max_iters=40,
        backtrack=opts.backtrack, armijo=opts.armijo,
        reg_floor=opts.reg_floor, restarts=0,
        divergence_limit=opts.divergence_limit, min_step=opts.min_step,
        stall_patience=12)
    # the first stage starts far from the central path and may need many
    # iterations; once on the path each stage takes only a few
    first_opts = SolverOptions(
        tol_residual=opts.tol_residual, max_iters=120,
        backtrack=opts.backtrack, armijo=opts.armijo,
        reg_floor=opts.reg_floor, restarts=0,
        divergence_limit=opts.divergence_limit, min_step=opts.min_step,
        stall_patience=40)
    z = np.asarray(z0, dtype=float).copy()
    mu = 1.0
    while mu > 1e-15:
        sys_mu = _FBSystem(instance, mu)
        stage_tol = max(0.1 * np.sqrt(mu), opts.tol_residual)
        rep = _newton_loop(instance, sys_mu, z,
                           first_opts if mu == 1.0 else stage_opts,
                           tol=stage_tol)
        z = rep.z
        # once deep on the central path, a badly stuck stage will not be
        # repaired by pushing mu further down; polish and report
        if mu < 1e-6 and rep.fb_residual > 1e3 * stage_tol:
            break
        mu *= 1e-2
    return _newton_loop(instance, _FBSystem(instance), z, stage_opts)


def _barrier_pass(instance, opts, z0):
    """Primal log-barrier path following for MCPs whose bounded coordinates
    are lower-bounded only (the assembled KKT systems have this shape).

    Iterates stay strictly interior via fraction-to-boundary step caps, so
    the spurious slightly-negative-multiplier stalls of the semismooth
    merit landscape cannot occur. Returns None when not applicable.
    """
    lo, hi = instance.lower, instance.upper
    if np.any(np.isfinite(hi)):
        return None
    idx = np.where(np.isfinite(lo))[0]
    if idx.size == 0:
        return None
    eye = np.eye(instance.dim)
    z = np.asarray(z0, dtype=float).copy()
    z[idx] = np.maximum(z[idx], lo[idx] + 0.5)
    lm = 1e-4

    def residual(zv, mu):
        Fz = instance.F(zv)
        R = Fz.copy()
        R[idx] -= mu / (zv[idx] - lo[idx])
        return R

    def try_direction(zv, R, base, g, step, mu):
        d = zv[idx] - lo[idx]
        neg = step[idx] < 0.0
        t = min(1.0, 0.995 * float(np.min(-d[neg] / step[idx][neg]))) \
            if np.any(neg) else 1.0
        slope = float(g @ step)
        for _ in range(30):
            zn = zv + t * step
            Rn = residual(zn, mu)
            if 0.5 * float(Rn @ Rn) <= base + opts.armijo * t * slope:
                return zn
            t *= 0.5
        return None

    for mu in 10.0 ** np.arange(0.0, -12.0, -1.0):
        for _ in range(30):
            R = residual(z, mu)
            if np.max(np.abs(R)) <= max(0.1 * mu, opts.tol_residual):
                break
            J = instance.jac(z)
            J[idx, idx] += mu / (z[idx] - lo[idx]) ** 2
            g = J.T @ R
            base = 0.5 * float(R @ R)
            z_new = None
            try:
                z_new = try_direction(z, R, base, g,
                                      np.linalg.solve(J, -R), mu)
            except np.linalg.LinAlgError:
                pass
            if z_new is None:
                for _ in range(8):
                    try:
                        step = np.linalg.solve(J.T @ J + lm * eye, -g)
                    except np.linalg.LinAlgError:
                        lm *= 10.0
                        continue
                    z_new = try_direction(z, R, base, g, step, mu)
                    if z_new is not None:
                        lm = max(0.3 * lm, 1e-10)
                        break
                    lm *= 10.0
            if z_new is None:
                break
            z = z_new
        # on the central path the residual tracks mu; far above it the
        # path is lost and deeper mu stages cannot recover
        if np.max(np.abs(residual(z, mu))) > 100.0 * max(mu, opts.tol_residual):
            break
    polish_opts = SolverOptions(
        tol_residual=opts.tol_residual, max_iters=30, restarts=0)
    return _newton_loop(instance, _FBSystem(instance), z, polish_opts)


def continuation_solve(instance, options=None, initial_guess=None):
    """Robust solve: plain semismooth Newton, then barrier path following,
    then smoothing continuation, then dual-reset restarts.

    The fallbacks target degenerate instances (weakly active constraints)
    where the exact Fischer-Burmeister merit has spurious stationary
    points; each stage restarts from the original guess.
    """
    opts = options or SolverOptions()
    z0 = np.asarray(initial_guess, dtype=float).copy() \
        if initial_guess is not None else default_start(instance)
    best = solve(instance, opts, z0)
    if best.converged:
        return best
    attempts = [best]
    rep = _barrier_pass(instance, opts, z0)
    if rep is not None:
        if rep.converged:
            return rep
        attempts.append(rep)
    rep = _smoothing_pass(instance, opts, z0)
    if rep.converged:
        return rep
    attempts.append(rep)
    # dual resets from the best iterate so far: project bounded coordinates
    # onto their bounds, or set them exactly at the bound
    seed = min(attempts, key=lambda r: r.fb_residual).z
    lo, hi = instance.lower, instance.upper
    for mode in ("project", "reset"):
        z = seed.copy()
        m = np.isfinite(lo)
        z[m] = np.maximum(z[m], lo[m]) if mode == "project" else lo[m]
        m = np.isfinite(hi)
        z[m] = np.minimum(z[m], hi[m])
        rep = solve(instance, opts, z)
        if rep.converged:
            return rep
        attempts.append(rep)
    return min(attempts, key=lambda r: r.fb_residual)


def _random_start(instance, rng, scale=5.0):
    lo, hi = instance.lower, instance.upper
    z = rng.normal(0.0, scale, size=instance.dim)
    m = np.isfinite(lo) & ~np.isfinite(hi)
    z[m] = lo[m] + np.abs(z[m])
    m = ~np.isfinite(lo) & np.isfinite(hi)
    z[m] = hi[m] - np.abs(z[m])
    m = np.isfinite(lo) & np.isfinite(hi)
    z[m] = lo[m] + (hi[m] - lo[m]) * rng.random(int(m.sum()))
    return z


def multistart_solve(instance, options=None, seeds=(0,), initial_guess=None,
                     distinct_tol=1e-4):
    """Run solve from the default start plus one random start per seed.

    Returns the converged report with the smallest MCP residual (ties broken
    by lexicographically smallest z); its ``basins`` field lists one solution
    vector per distinct converged basin. Deterministic for a fixed seed list.
    """
    opts = options or SolverOptions()
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    starts = [initial_guess if initial_guess is not None else default_start(instance)]
    for s in seeds:
        starts.append(_random_start(instance, np.random.default_rng(s)))
    reports = [solve(instance, opts, z0) for z0 in starts]
    converged = [r for r in reports if r.converged]
    if not converged:
        best = min(reports, key=lambda r: r.fb_residual)
        best.status = SolveStatus.NONE_CONVERGED
        return best
    basins = []
    for r in converged:
        if not any(np.max(np.abs(r.z - b)) <= distinct_tol for b in basins):
            basins.append(r.z.copy())

    def key(r):
        return (r.kkt_residual, tuple(np.round(r.z, 12)))

    best = min(converged, key=key)
    best.basins = basins
    return best
