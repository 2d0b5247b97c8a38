"""Closed-form reference solutions for the three analytic benchmark games.

These are used as ground truth by the tests; each also ships a builder for
the corresponding GameSpec so solver output can be checked end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import QuadraticFunction, linear
from .game import PlayerSpec, build_game

HARKER_ACTIVE_ALPHA_MIN = 21.0 / 8.0


def example1_game():
    """Two scalar players, costs (x-1)^2 and (y-1/2)^2, shared x+y-1 <= 0."""
    c1 = QuadraticFunction(np.diag([2.0, 0.0]), [-2.0, 0.0], 1.0)
    c2 = QuadraticFunction(np.diag([0.0, 2.0]), [0.0, -1.0], 0.25)
    shared = linear([1.0, 1.0], -1.0)
    return build_game([PlayerSpec(1, c1), PlayerSpec(1, c2)], [shared])


def example1(alpha):
    """Equilibrium (x, y) = (1 - alpha/2, alpha/2) for alpha in (0,1)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    return 1.0 - 0.5 * alpha, 0.5 * alpha


def example1_sigma(alpha):
    """Fictitious shared multiplier under the sum-to-one rule: sigma = 1."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    return 1.0


def three_car_game(dt=1.0, x0=(0.0, 0.5, 0.75)):
    """Three cars on two lanes, one time step. Each player controls
    (position, velocity); car 2 must stay behind car 3."""
    x0 = np.asarray(x0, dtype=float)
    n = 6  # (x_i, v_i) per car

    def cost_matrix(i):
        # J_1 = -x_1 + x_2 + v_1^2/2 ; J_2 = -x_2 + x_1 + v_2^2/2
        # J_3 = -x_1 + x_2 + v_3^2/2
        Q = np.zeros((n, n))
        Q[2 * i + 1, 2 * i + 1] = 1.0
        q = np.zeros(n)
        if i == 0:
            q[0], q[2] = -1.0, 1.0
        elif i == 1:
            q[2], q[0] = -1.0, 1.0
        else:
            q[0], q[2] = -1.0, 1.0
        return QuadraticFunction(Q, q)

    players = []
    for i in range(3):
        a = np.zeros(2)
        a[0], a[1] = 1.0, -dt          # x_i - x_i(0) - v_i dt = 0
        dyn = linear(a, -x0[i])
        players.append(PlayerSpec(2, cost_matrix(i), eq_constraints=[dyn]))
    a = np.zeros(n)
    a[2], a[4] = 1.0, -1.0             # x_2 - x_3 <= 0
    shared = linear(a)
    return build_game(players, [shared])


def three_car(alpha, dt=1.0, x0=(0.0, 0.5, 0.75)):
    """Equilibrium family (x1, v1, x2, v2, x3, v3) for alpha in (0,1),
    where alpha is car 2's share of the (car 2, car 3) factor pair."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    v1 = 1.0
    v2 = 1.0 - 0.75 * alpha
    v3 = 0.75 * (1.0 - alpha)
    x1 = x0[0] + dt * dt
    x23 = 1.5 - 0.75 * alpha
    return np.array([x1, v1, x23, v2, x23, v3])


def three_car_alpha(alpha2, alpha3):
    """Reduce a (car 2, car 3) factor pair to the scalar family parameter;
    car 1's factor never enters."""
    if alpha2 <= 0.0 or alpha3 <= 0.0:
        raise ValueError("factors must be strictly positive")
    return alpha2 / (alpha2 + alpha3)


def three_car_sigma(alpha2, alpha3):
    """Fictitious shared multiplier: sigma = 0.75 / (alpha2 + alpha3)."""
    if alpha2 <= 0.0 or alpha3 <= 0.0:
        raise ValueError("factors must be strictly positive")
    return 0.75 / (alpha2 + alpha3)


def harker_game():
    """Two players with bilinear cross terms, bounds 0 <= x_i <= 10 and the
    shared budget x_1 + x_2 <= 15."""
    Q1 = np.array([[2.0, 8.0 / 3.0], [8.0 / 3.0, 0.0]])
    c1 = QuadraticFunction(Q1, [-34.0, 0.0])
    Q2 = np.array([[0.0, 5.0 / 4.0], [5.0 / 4.0, 2.0]])
    c2 = QuadraticFunction(Q2, [0.0, -24.25])
    bounds = [linear([-1.0]), linear([1.0], -10.0)]   # -x <= 0, x - 10 <= 0
    shared = linear([1.0, 1.0], -15.0)
    players = [PlayerSpec(1, c1, ineq_constraints=bounds),
               PlayerSpec(1, c2, ineq_constraints=[linear([-1.0]), linear([1.0], -10.0)])]
    return build_game(players, [shared])


@dataclass(frozen=True)
class HarkerCandidate:
    x: np.ndarray
    sigma: float
    active: bool
    label: str


def harker(alpha):
    """Closed-form equilibrium candidates at factor ratio alpha > 0.

    The interior point (5, 9) is always present. For alpha > 21/8 the
    budget-active branch ((72a-69)/(8a-9), (48a-66)/(8a-9)) with
    sigma = 8/(8a-9) also satisfies the variable bounds.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be strictly positive")
    cands = [HarkerCandidate(np.array([5.0, 9.0]), 0.0, False, "interior")]
    den = 8.0 * alpha - 9.0
    if den > 0.0:
        x1 = (72.0 * alpha - 69.0) / den
        x2 = (48.0 * alpha - 66.0) / den
        sig = 8.0 / den
        if 0.0 <= x1 <= 10.0 and 0.0 <= x2 <= 10.0 and x1 + x2 <= 15.0 + 1e-12:
            cands.append(HarkerCandidate(np.array([x1, x2]), sig, True, "active"))
    return cands
