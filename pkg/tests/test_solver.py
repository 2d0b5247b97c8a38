import itertools

import numpy as np
import pytest

from gnekit.assembly import MCPInstance
from gnekit.solver import (SolverOptions, SolveStatus, continuation_solve,
                           default_start, fb_compose, _fb_partials,
                           multistart_solve, natural_residual, solve)


# -- Fischer-Burmeister algebra ------------------------------------------


def test_fb_zero_iff_complementary():
    assert fb_compose(0.0, 5.0) == pytest.approx(0.0)
    assert fb_compose(3.0, 0.0) == pytest.approx(0.0)
    assert fb_compose(1.0, 1.0) != pytest.approx(0.0)
    assert fb_compose(-1.0, 2.0) < 0.0


def test_fb_smoothed_central_path():
    # smoothed composition vanishes exactly on a*b = mu with a, b > 0
    mu = 0.3
    for a in (0.1, 1.0, 7.0):
        b = mu / a
        assert fb_compose(a, b, mu) == pytest.approx(0.0, abs=1e-14)


def test_fb_partials_match_fd():
    rng = np.random.default_rng(0)
    for mu in (0.0, 0.05):
        a, b = rng.normal(size=2) + 1.0
        da, db = _fb_partials(np.array([a]), np.array([b]), mu)
        h = 1e-7
        fda = (fb_compose(a + h, b, mu) - fb_compose(a - h, b, mu)) / (2 * h)
        fdb = (fb_compose(a, b + h, mu) - fb_compose(a, b - h, mu)) / (2 * h)
        assert da[0] == pytest.approx(fda, abs=1e-6)
        assert db[0] == pytest.approx(fdb, abs=1e-6)


def test_fb_kink_uses_clarke_element():
    da, db = _fb_partials(np.array([0.0]), np.array([0.0]))
    c = 1.0 - 1.0 / np.sqrt(2.0)
    assert da[0] == pytest.approx(c)
    assert db[0] == pytest.approx(c)


# -- randomized affine MCPs vs brute-force branch enumeration -------------


def random_affine_mcp(rng, dim=5):
    A = rng.normal(size=(dim, dim))
    M = A @ A.T + dim * np.eye(dim)      # strongly monotone
    q = rng.normal(size=dim) * 3.0
    lo = np.full(dim, -np.inf)
    hi = np.full(dim, np.inf)
    for j in range(dim):
        kind = rng.integers(4)
        if kind == 1:
            lo[j] = rng.normal()
        elif kind == 2:
            hi[j] = rng.normal()
        elif kind == 3:
            lo[j] = rng.normal()
            hi[j] = lo[j] + abs(rng.normal()) + 0.1
    inst = MCPInstance(dim, lambda z: M @ z + q, lambda z: M, lo, hi)
    return inst, M, q


def brute_force_mcp(M, q, lo, hi, tol=1e-9):
    """Enumerate per-coordinate branches (at lower / interior / at upper),
    solve each candidate linear system, and keep sign-feasible solutions."""
    dim = q.size
    choices = []
    for j in range(dim):
        opts = ["interior"]
        if np.isfinite(lo[j]):
            opts.append("lower")
        if np.isfinite(hi[j]):
            opts.append("upper")
        choices.append(opts)
    sols = []
    for combo in itertools.product(*choices):
        fixed = np.zeros(dim)
        mask_int = np.array([c == "interior" for c in combo])
        for j, c in enumerate(combo):
            if c == "lower":
                fixed[j] = lo[j]
            elif c == "upper":
                fixed[j] = hi[j]
        z = fixed.copy()
        idx = np.flatnonzero(mask_int)
        if idx.size:
            rhs = -(q[idx] + M[np.ix_(idx, ~mask_int)] @ fixed[~mask_int])
            z[idx] = np.linalg.solve(M[np.ix_(idx, idx)], rhs)
        F = M @ z + q
        ok = True
        for j, c in enumerate(combo):
            if c == "interior":
                ok &= (lo[j] - tol <= z[j] <= hi[j] + tol) and abs(F[j]) <= tol
            elif c == "lower":
                ok &= F[j] >= -tol
            else:
                ok &= F[j] <= tol
        if ok:
            sols.append(z)
    return sols


@pytest.mark.parametrize("seed", range(12))
def test_solver_matches_brute_force_on_random_mcps(seed):
    rng = np.random.default_rng(seed)
    inst, M, q = random_affine_mcp(rng)
    report = multistart_solve(inst, SolverOptions(tol_residual=1e-12),
                              seeds=(0, 1, 2))
    assert report.converged
    refs = brute_force_mcp(M, q, inst.lower, inst.upper)
    assert refs, "strongly monotone MCP must have a solution"
    dists = [np.max(np.abs(report.z - ref)) for ref in refs]
    assert min(dists) <= 1e-7


def test_natural_residual_zero_at_solution():
    rng = np.random.default_rng(42)
    inst, M, q = random_affine_mcp(rng)
    rep = solve(inst, SolverOptions(tol_residual=1e-12))
    assert rep.converged
    assert natural_residual(inst, rep.z) <= 1e-9


# -- solver behavior -------------------------------------------------------


def test_default_start_respects_bounds():
    lo = np.array([-np.inf, 0.0, -np.inf, 1.0])
    hi = np.array([np.inf, np.inf, 2.0, 3.0])
    inst = MCPInstance(4, lambda z: z, lambda z: np.eye(4), lo, hi)
    z = default_start(inst)
    assert np.all(z >= lo) and np.all(z <= hi)


def test_wrong_guess_dimension_raises():
    inst = MCPInstance(2, lambda z: z, lambda z: np.eye(2),
                       [-np.inf] * 2, [np.inf] * 2)
    with pytest.raises(ValueError):
        solve(inst, initial_guess=np.zeros(3))


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(tol_residual=0.0)
    with pytest.raises(ValueError):
        SolverOptions(max_iters=0)
    with pytest.raises(ValueError):
        SolverOptions(backtrack=1.5)


def test_determinism():
    rng = np.random.default_rng(9)
    inst, _, _ = random_affine_mcp(rng)
    r1 = multistart_solve(inst, seeds=(0, 1))
    r2 = multistart_solve(inst, seeds=(0, 1))
    assert np.array_equal(r1.z, r2.z)


def test_multistart_reports_basins():
    # z^2 - 1 has roots +-1; both basins should surface
    inst = MCPInstance(1, lambda z: z * z - 1.0,
                       lambda z: np.array([[2.0 * z[0]]]),
                       [-np.inf], [np.inf])
    rep = multistart_solve(inst, seeds=tuple(range(8)))
    assert rep.converged
    roots = sorted(float(b[0]) for b in rep.basins)
    assert len(roots) == 2
    assert roots[0] == pytest.approx(-1.0, abs=1e-7)
    assert roots[1] == pytest.approx(1.0, abs=1e-7)


def test_continuation_solve_agrees_with_plain():
    rng = np.random.default_rng(7)
    inst, M, q = random_affine_mcp(rng)
    r1 = solve(inst, SolverOptions(tol_residual=1e-10))
    r2 = continuation_solve(inst, SolverOptions(tol_residual=1e-10))
    assert r1.converged and r2.converged
    assert np.allclose(r1.z, r2.z, atol=1e-7)


def test_continuation_solve_degenerate_weakly_active():
    # weakly active bound: solution exactly at the lower bound with F = 0,
    # where the exact Fischer-Burmeister Jacobian is singular at the root
    inst = MCPInstance(1, lambda z: z ** 2, lambda z: np.array([[2 * z[0]]]),
                       [0.0], [np.inf])
    rep = continuation_solve(inst, SolverOptions(tol_residual=1e-9),
                             initial_guess=np.array([2.0]))
    assert rep.converged
    assert abs(rep.z[0]) <= 1e-4


def test_divergence_detected():
    inst = MCPInstance(1, lambda z: -np.exp(z) + 1e9,
                       lambda z: np.array([[-np.exp(z[0])]]),
                       [-np.inf], [np.inf])
    rep = solve(inst, SolverOptions(max_iters=10, restarts=0,
                                    divergence_limit=1e6))
    assert not rep.converged
