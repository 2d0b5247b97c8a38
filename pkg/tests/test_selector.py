import numpy as np
import pytest

from gnekit.game import FactorRule
from gnekit.oracles import example1_game, three_car_game
from gnekit.selector import (SelectionProblem, objective_single_player,
                             objective_sum_of_costs, select)


def test_sum_of_costs_objective():
    g = example1_game()
    J0 = objective_sum_of_costs(g)
    x = np.array([0.75, 0.25])
    assert J0(x) == pytest.approx((0.25) ** 2 + (0.25) ** 2)


def test_single_player_objective_bounds():
    g = example1_game()
    with pytest.raises(IndexError):
        objective_single_player(g, 0)
    with pytest.raises(IndexError):
        objective_single_player(g, 3)
    J1 = objective_single_player(g, 1)
    assert J1(np.array([0.5, 0.5])) == pytest.approx(0.25)


def test_select_interior_minimum():
    # along x(alpha) = (1 - a/2, a/2): J0 = (a^2 + (a-1)^2)/4, argmin a = 1/2
    g = example1_game()
    prob = SelectionProblem(g, objective_sum_of_costs(g),
                            rule=FactorRule.SUM_TO_ONE, grid_density=11,
                            refine_iters=40)
    res = select(prob)
    assert not res.boundary
    assert res.params[0] == pytest.approx(0.5, abs=1e-4)
    assert res.value == pytest.approx(0.125, abs=1e-8)
    assert res.solution.x == pytest.approx([0.75, 0.25], abs=1e-4)


def test_select_flags_boundary_and_reports_limit():
    # minimizing player 1's own cost pushes alpha to the lower edge
    g = example1_game()
    prob = SelectionProblem(g, objective_single_player(g, 1),
                            rule=FactorRule.SUM_TO_ONE, grid_density=11,
                            refine_iters=40)
    res = select(prob)
    assert res.boundary
    assert res.boundary_limit is not None
    # limit solve sits just inside the open edge: x -> (1, 0)
    assert res.boundary_limit.x[0] == pytest.approx(1.0, abs=1e-4)
    assert res.boundary_limit.x[1] == pytest.approx(0.0, abs=1e-4)


def test_select_trace_and_determinism():
    g = example1_game()
    def make():
        return SelectionProblem(g, objective_sum_of_costs(g),
                                rule=FactorRule.SUM_TO_ONE, grid_density=5,
                                refine_iters=20)
    r1, r2 = select(make()), select(make())
    assert r1.params[0] == r2.params[0]
    assert r1.value == r2.value
    assert len(r1.trace) >= 5


def test_select_validates_box():
    g = example1_game()
    with pytest.raises(ValueError):
        SelectionProblem(g, objective_sum_of_costs(g),
                         rule=FactorRule.SUM_TO_ONE,
                         lower=np.array([0.5]), upper=np.array([0.5]))
    with pytest.raises(ValueError):
        SelectionProblem(g, objective_sum_of_costs(g),
                         rule=FactorRule.SUM_TO_ONE, grid_density=1)


def test_select_multiparameter_nelder_mead():
    # three-car family with explicit (a2, a3) factors; J0 = sum of costs
    # depends only on a2/(a2+a3); the refiner must still find a box minimum
    from gnekit.game import make_factors
    g = three_car_game()

    def fmap(p):
        p = np.atleast_1d(p)
        return make_factors(3, 1, FactorRule.UNNORMALIZED,
                            [1.0, float(p[0]), float(p[1])])

    prob = SelectionProblem(g, objective_sum_of_costs(g), factor_map=fmap,
                            lower=np.array([0.2, 0.2]),
                            upper=np.array([2.0, 2.0]),
                            grid_density=4, refine_iters=30)
    res = select(prob)
    assert np.isfinite(res.value)
    assert res.solution is not None
    vals = [e.value for e in res.trace if np.isfinite(e.value)]
    assert res.value <= min(vals) + 1e-12
