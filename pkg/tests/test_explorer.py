import numpy as np
import pytest

from gnekit.explorer import (sensitivity, standard_factor_map, sweep,
                             sweep_to_csv, verify_monotonicity)
from gnekit.game import FactorRule, make_factors
from gnekit.oracles import example1, example1_game, harker, harker_game
from gnekit.solver import SolverOptions


def test_sweep_matches_closed_form():
    g = example1_game()
    grid = np.arange(0.05, 0.96, 0.05)
    res = sweep(g, FactorRule.SUM_TO_ONE, grid)
    assert len(res.converged_entries()) == grid.size
    for e in res.entries:
        ref = np.array(example1(e.alpha))
        assert np.max(np.abs(e.solution.x - ref)) <= 1e-6


def test_sweep_rejects_unsorted_grid():
    g = example1_game()
    with pytest.raises(ValueError):
        sweep(g, FactorRule.SUM_TO_ONE, [0.5, 0.3])


def test_sweep_fine_grid_has_no_jumps():
    g = example1_game()
    res = sweep(g, FactorRule.SUM_TO_ONE, np.linspace(0.1, 0.9, 17))
    assert res.jump_indices == []
    assert not any(e.jump_after for e in res.entries)


def test_sweep_flags_large_steps_as_jumps():
    # two far-apart grid points move x by 0.45 > 10% of its scale
    g = example1_game()
    res = sweep(g, FactorRule.SUM_TO_ONE, [0.05, 0.95])
    assert res.jump_indices == [0]
    assert res.entries[0].jump_after


def test_standard_factor_map_rules():
    g = example1_game()
    fm = standard_factor_map(g, FactorRule.SUM_TO_ONE)
    f = fm(0.3)
    assert f.diagonals[0][0] == pytest.approx(0.3)
    assert f.diagonals[1][0] == pytest.approx(0.7)
    g2 = harker_game()
    fm2 = standard_factor_map(g2, FactorRule.FIRST_PLAYER_IDENTITY)
    f2 = fm2(4.0)
    assert f2.diagonals[0][0] == pytest.approx(1.0)
    assert f2.diagonals[1][0] == pytest.approx(4.0)


# -- sensitivities ----------------------------------------------------------


def solve_example1_solution(alpha):
    from gnekit.assembly import assemble_scaled, solution_from_z
    g = example1_game()
    factors = make_factors(2, 1, FactorRule.SUM_TO_ONE, [alpha])
    inst = assemble_scaled(g, factors)
    x = np.array(example1(alpha))
    z = np.concatenate([x, [1.0]])
    return g, factors, solution_from_z(g, inst.layout, z, factors)


def test_sensitivity_matches_closed_form_derivative():
    g, factors, sol = solve_example1_solution(0.4)
    rep = sensitivity(g, factors, sol)
    # x(alpha) = (1 - alpha/2, alpha/2): dx/dalpha = (-1/2, 1/2), sigma flat
    assert rep.dx == pytest.approx([-0.5, 0.5], abs=1e-10)
    assert rep.dsigma == pytest.approx([0.0], abs=1e-10)
    assert rep.hypothesis_ok


def test_sensitivity_dJ_matches_fd():
    alpha, h = 0.4, 1e-6
    g, factors, sol = solve_example1_solution(alpha)
    rep = sensitivity(g, factors, sol)
    Jp = g.costs(np.array(example1(alpha + h)))
    Jm = g.costs(np.array(example1(alpha - h)))
    fd = (Jp - Jm) / (2.0 * h)
    assert np.max(np.abs(rep.dJ - fd)) <= 1e-6


def test_sensitivity_own_cost_nondecreasing():
    # player 1's cost cannot fall as its own factor grows (coupled direction)
    for alpha in (0.2, 0.5, 0.8):
        g, factors, sol = solve_example1_solution(alpha)
        rep = sensitivity(g, factors, sol)
        assert rep.hypothesis_ok
        assert rep.dJ[0] >= -1e-10


def test_sensitivity_requires_active_shared():
    g = harker_game()
    factors = make_factors(2, 1, FactorRule.FIRST_PLAYER_IDENTITY, [1.0])
    from gnekit.assembly import assemble_scaled, solution_from_z
    inst = assemble_scaled(g, factors)
    interior = harker(1.0)[0]
    z = np.concatenate([interior.x, np.zeros(4), [0.0]])
    sol = solution_from_z(g, inst.layout, z, factors)
    with pytest.raises(ValueError):
        sensitivity(g, factors, sol)


def test_monotonicity_report_clean_on_example1():
    g = example1_game()
    rep = verify_monotonicity(g, FactorRule.SUM_TO_ONE,
                              np.linspace(0.1, 0.9, 9), player=0)
    assert rep.ok
    # J_1 = alpha^2/4 along the family: strictly increasing in alpha
    assert np.all(np.diff(rep.costs) > 0)


def test_sweep_csv_round_trip():
    g = example1_game()
    res = sweep(g, FactorRule.SUM_TO_ONE, [0.25, 0.5, 0.75])
    text = sweep_to_csv(g, res)
    lines = text.strip().splitlines()
    assert lines[0].startswith("alpha,x0,x1,sigma0,J1,J2")
    assert len(lines) == 4
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(0.25)
    assert float(first[1]) == pytest.approx(1.0 - 0.125, abs=1e-6)
