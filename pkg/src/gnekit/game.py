"""Declarative M-player game model with private and shared constraints.

Sign conventions (global): private equalities h(x^i) = 0, private
inequalities g(x^i) <= 0, shared constraints s(x) <= 0. Callers must
pre-negate any >= constraints.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .functions import ConstraintBlock, SmoothFunction


class FactorRule(enum.Enum):
    FIRST_PLAYER_IDENTITY = "first-identity"
    SUM_TO_ONE = "sum-to-one"
    UNNORMALIZED = "unnormalized"


def _as_blocks(items, dim):
    """Normalize a mix of SmoothFunction / ConstraintBlock into blocks."""
    blocks = []
    for it in items:
        if isinstance(it, ConstraintBlock):
            if it.dim != dim:
                raise ValueError("constraint block dimension mismatch")
            blocks.append(it)
        elif isinstance(it, SmoothFunction):
            if it.dim != dim:
                raise ValueError("constraint references a foreign block")
            blocks.append(ConstraintBlock.from_scalars([it], dim))
        else:
            raise TypeError(f"unsupported constraint type {type(it)!r}")
    return blocks


class PlayerSpec:
    """One player: decision dimension, cost over the full stacked vector,
    and private constraints over the player's own block only."""

    def __init__(self, dim, cost, eq_constraints=(), ineq_constraints=()):
        if dim < 1:
            raise ValueError("player dimension must be positive")
        self.dim = int(dim)
        self.cost = cost
        self.eq_blocks = _as_blocks(eq_constraints, self.dim)
        self.ineq_blocks = _as_blocks(ineq_constraints, self.dim)
        self.n_eq = sum(b.size for b in self.eq_blocks)
        self.n_ineq = sum(b.size for b in self.ineq_blocks)


class GameSpec:
    """Validated M-player game. Immutable after construction."""

    def __init__(self, players, shared_constraints=()):
        if not players:
            raise ValueError("need at least one player")
        self.players = list(players)
        self.M = len(self.players)
        dims = [p.dim for p in self.players]
        self.dims = dims
        self.n = sum(dims)
        offs = np.concatenate([[0], np.cumsum(dims)]).astype(int)
        self.block_slices = [slice(int(offs[i]), int(offs[i + 1])) for i in range(self.M)]
        self.shared_blocks = _as_blocks(shared_constraints, self.n)
        self.m0 = sum(b.size for b in self.shared_blocks)
        for i, p in enumerate(self.players):
            if p.cost.dim != self.n:
                raise ValueError(f"player {i} cost dimension {p.cost.dim} != n={self.n}")

    def block(self, x, i):
        return np.asarray(x, dtype=float)[self.block_slices[i]]

    def cost(self, i, x):
        return self.players[i].cost.value(x)

    def costs(self, x):
        return np.array([self.cost(i, x) for i in range(self.M)])

    def shared_value(self, x):
        if not self.shared_blocks:
            return np.zeros(0)
        return np.concatenate([b.value(x) for b in self.shared_blocks])

    def shared_jac(self, x):
        if not self.shared_blocks:
            return np.zeros((0, self.n))
        return np.vstack([b.jac(x) for b in self.shared_blocks])

    def shared_hess_combo(self, x, w):
        H = np.zeros((self.n, self.n))
        off = 0
        for b in self.shared_blocks:
            wb = w[off:off + b.size]
            if np.any(wb != 0.0):
                H += b.hess_combo(x, wb)
            off += b.size
        return H

    def private_eq(self, i, xi):
        p = self.players[i]
        if not p.eq_blocks:
            return np.zeros(0)
        return np.concatenate([b.value(xi) for b in p.eq_blocks])

    def private_eq_jac(self, i, xi):
        p = self.players[i]
        if not p.eq_blocks:
            return np.zeros((0, p.dim))
        return np.vstack([b.jac(xi) for b in p.eq_blocks])

    def private_eq_hess_combo(self, i, xi, w):
        p = self.players[i]
        H = np.zeros((p.dim, p.dim))
        off = 0
        for b in p.eq_blocks:
            wb = w[off:off + b.size]
            if np.any(wb != 0.0):
                H += b.hess_combo(xi, wb)
            off += b.size
        return H

    def private_ineq(self, i, xi):
        p = self.players[i]
        if not p.ineq_blocks:
            return np.zeros(0)
        return np.concatenate([b.value(xi) for b in p.ineq_blocks])

    def private_ineq_jac(self, i, xi):
        p = self.players[i]
        if not p.ineq_blocks:
            return np.zeros((0, p.dim))
        return np.vstack([b.jac(xi) for b in p.ineq_blocks])

    def private_ineq_hess_combo(self, i, xi, w):
        p = self.players[i]
        H = np.zeros((p.dim, p.dim))
        off = 0
        for b in p.ineq_blocks:
            wb = w[off:off + b.size]
            if np.any(wb != 0.0):
                H += b.hess_combo(xi, wb)
            off += b.size
        return H


def build_game(players, shared=()):
    """Validate and freeze an M-player game with shared constraints."""
    return GameSpec(players, shared)


@dataclass(frozen=True)
class FactorAssignment:
    """Per-player positive diagonal scaling of the shared multipliers.

    diagonals[i] holds the m0 diagonal entries of A_i.
    """

    diagonals: tuple
    rule: FactorRule = FactorRule.UNNORMALIZED

    def __post_init__(self):
        diags = tuple(np.asarray(d, dtype=float) for d in self.diagonals)
        object.__setattr__(self, "diagonals", diags)
        m0 = diags[0].size if diags else 0
        for d in diags:
            if d.size != m0:
                raise ValueError("factor diagonals must share length m0")
            if np.any(d <= 0.0):
                raise ValueError("factor diagonal entries must be strictly positive")
        if self.rule is FactorRule.FIRST_PLAYER_IDENTITY and diags:
            if not np.allclose(diags[0], 1.0, rtol=0, atol=0):
                raise ValueError("first-player-identity rule requires A_1 = I exactly")
        if self.rule is FactorRule.SUM_TO_ONE and diags:
            col = np.sum(diags, axis=0)
            if np.any(np.abs(col - 1.0) > 1e-12):
                raise ValueError("sum-to-one rule violated")

    @property
    def M(self):
        return len(self.diagonals)

    @property
    def m0(self):
        return self.diagonals[0].size if self.diagonals else 0

    def matrix(self, i):
        return np.diag(self.diagonals[i])

    def scale(self, i, sigma):
        return self.diagonals[i] * np.asarray(sigma, dtype=float)

    @staticmethod
    def identity(M, m0):
        return FactorAssignment(tuple(np.ones(m0) for _ in range(M)))


def make_factors(M, m0, rule, free_params=()):
    """Build a FactorAssignment from a rule plus its free parameters.

    FIRST_PLAYER_IDENTITY: free_params are the (M-1, m0) entries of
    players 2..M (any positives); A_1 = I.
    SUM_TO_ONE: free_params are the (M-1, m0) entries of players 1..M-1,
    each in (0, 1) with column sums < 1; player M absorbs the remainder.
    UNNORMALIZED: free_params are all (M, m0) entries.
    """
    rule = FactorRule(rule)
    params = np.asarray(free_params, dtype=float).reshape(-1)
    if rule is FactorRule.FIRST_PLAYER_IDENTITY:
        if params.size != (M - 1) * m0:
            raise ValueError("need (M-1)*m0 free parameters")
        if np.any(params <= 0.0):
            raise ValueError("factor entries must be strictly positive")
        rest = params.reshape(M - 1, m0)
        diags = [np.ones(m0)] + [rest[i].copy() for i in range(M - 1)]
    elif rule is FactorRule.SUM_TO_ONE:
        if params.size != (M - 1) * m0:
            raise ValueError("need (M-1)*m0 free parameters")
        if np.any(params <= 0.0) or np.any(params >= 1.0):
            raise ValueError("sum-to-one entries must lie in (0,1)")
        rest = params.reshape(M - 1, m0)
        col = rest.sum(axis=0)
        if np.any(col >= 1.0):
            raise ValueError("sum-to-one column sum exceeds 1")
        diags = [rest[i].copy() for i in range(M - 1)] + [1.0 - col]
    elif rule is FactorRule.UNNORMALIZED:
        if params.size != M * m0:
            raise ValueError("need M*m0 parameters for the unnormalized rule")
        if np.any(params <= 0.0):
            raise ValueError("factor entries must be strictly positive")
        diags = [row.copy() for row in params.reshape(M, m0)]
    else:  # pragma: no cover
        raise ValueError(rule)
    return FactorAssignment(tuple(diags), rule)


def effective_multipliers(assignment, sigma):
    """Map the fictitious shared multiplier sigma to per-player sigma_i = A_i sigma."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size != assignment.m0:
        raise ValueError("sigma length must equal m0")
    if np.any(sigma < 0.0):
        raise ValueError("sigma must be elementwise nonnegative")
    return [assignment.scale(i, sigma) for i in range(assignment.M)]
