"""Assemble the stacked KKT system of a game into a box-constrained MCP.

Three assemblies are provided:
  * assemble_scaled    - single fictitious shared multiplier sigma, scaled
                         per player by its diagonal factor matrix.
  * assemble_normalized - all factors equal to the identity.
  * assemble_full      - per-player shared multipliers, the shared rows
                         duplicated once per player (diagnostic form).

Variable layout: z = [x, mu_1..mu_M, lambda_1..lambda_M, sigma...].
Inequality multipliers live in [0, inf) boxes with F-rows -g and -s, so the
MCP complementarity reproduces 0 <= lambda, lambda' g = 0, g <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import FactorAssignment, GameSpec

# shared-constraint activity classification thresholds
ACTIVE_S_TOL = 1e-7
ACTIVE_SIGMA_TOL = 1e-7


@dataclass(frozen=True)
class Layout:
    """Index map partitioning {0..d-1} into x / mu / lambda / sigma blocks."""

    n: int
    x_slices: tuple          # per player, into the x region
    mu_slices: tuple         # per player
    lam_slices: tuple        # per player
    sigma_slices: tuple      # one slice (scaled/normalized) or M (full)
    dim: int

    def pack(self, x, mus, lams, sigmas):
        z = np.zeros(self.dim)
        z[: self.n] = x
        for sl, v in zip(self.mu_slices, mus):
            z[sl] = v
        for sl, v in zip(self.lam_slices, lams):
            z[sl] = v
        if len(self.sigma_slices) == 1:
            z[self.sigma_slices[0]] = sigmas
        else:
            for sl, v in zip(self.sigma_slices, sigmas):
                z[sl] = v
        return z

    def unpack(self, z):
        z = np.asarray(z, dtype=float)
        x = z[: self.n].copy()
        mus = [z[sl].copy() for sl in self.mu_slices]
        lams = [z[sl].copy() for sl in self.lam_slices]
        sigmas = [z[sl].copy() for sl in self.sigma_slices]
        if len(sigmas) == 1:
            return x, mus, lams, sigmas[0]
        return x, mus, lams, sigmas


class MCPInstance:
    """Box-constrained MCP: find z in [l, u] with F(z) complementary to the
    active bound at each coordinate. Immutable; F/jac callbacks are pure."""

    def __init__(self, dim, F, jac, lower, upper, layout=None):
        self.dim = int(dim)
        self.F = F
        self.jac = jac
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.layout = layout
        if self.lower.size != dim or self.upper.size != dim:
            raise ValueError("bounds must have length dim")
        if np.any(self.lower > self.upper):
            raise ValueError("lower must be <= upper elementwise")


@dataclass
class GNESolution:
    """Primal strategies plus all multipliers of a candidate equilibrium."""

    x: np.ndarray
    mus: list
    lams: list
    sigma: np.ndarray                 # fictitious shared multiplier
    factors: FactorAssignment = None

    @property
    def effective_sigmas(self):
        if self.factors is None:
            return [self.sigma.copy()]
        return [self.factors.scale(i, self.sigma) for i in range(self.factors.M)]


@dataclass
class KKTResidual:
    stationarity: np.ndarray      # per-player inf-norms
    primal_eq: float
    primal_ineq: float
    primal_shared: float
    comp_private: float
    comp_shared: float
    dual: float

    @property
    def overall(self):
        comps = [self.primal_eq, self.primal_ineq, self.primal_shared,
                 self.comp_private, self.comp_shared, self.dual]
        if self.stationarity.size:
            comps.append(float(np.max(self.stationarity)))
        return float(max(comps))


def _layout(game: GameSpec, n_sigma_blocks):
    offs = game.n
    mu_slices = []
    for p in game.players:
        mu_slices.append(slice(offs, offs + p.n_eq))
        offs += p.n_eq
    lam_slices = []
    for p in game.players:
        lam_slices.append(slice(offs, offs + p.n_ineq))
        offs += p.n_ineq
    sigma_slices = []
    for _ in range(n_sigma_blocks):
        sigma_slices.append(slice(offs, offs + game.m0))
        offs += game.m0
    x_slices = tuple(game.block_slices)
    return Layout(game.n, x_slices, tuple(mu_slices), tuple(lam_slices),
                  tuple(sigma_slices), offs)


def _bounds(game: GameSpec, layout: Layout):
    lo = np.full(layout.dim, -np.inf)
    hi = np.full(layout.dim, np.inf)
    for sl in layout.lam_slices:
        lo[sl] = 0.0
    for sl in layout.sigma_slices:
        lo[sl] = 0.0
    return lo, hi


def assemble_scaled(game: GameSpec, factors: FactorAssignment) -> MCPInstance:
    """MCP for the scaled KKT system with per-player factors A_i."""
    if factors.M != game.M or factors.m0 != game.m0:
        raise ValueError("factor assignment not dimensioned for this game")
    layout = _layout(game, 1)
    lo, hi = _bounds(game, layout)
    M, n, m0 = game.M, game.n, game.m0
    s_sigma = layout.sigma_slices[0]

    def F(z):
        x = z[:n]
        sigma = z[s_sigma]
        out = np.empty(layout.dim)
        Js = game.shared_jac(x) if m0 else np.zeros((0, n))
        for i in range(M):
            bi = game.block_slices[i]
            xi = x[bi]
            gi = game.players[i].cost.grad(x)[bi]
            mu_i = z[layout.mu_slices[i]]
            lam_i = z[layout.lam_slices[i]]
            if mu_i.size:
                gi = gi + game.private_eq_jac(i, xi).T @ mu_i
            if lam_i.size:
                gi = gi + game.private_ineq_jac(i, xi).T @ lam_i
            if m0:
                gi = gi + Js[:, bi].T @ factors.scale(i, sigma)
            out[bi] = gi
            out[layout.mu_slices[i]] = game.private_eq(i, xi)
            out[layout.lam_slices[i]] = -game.private_ineq(i, xi)
        if m0:
            out[s_sigma] = -game.shared_value(x)
        return out

    def jac(z):
        x = z[:n]
        sigma = z[s_sigma]
        J = np.zeros((layout.dim, layout.dim))
        Js = game.shared_jac(x) if m0 else np.zeros((0, n))
        for i in range(M):
            bi = game.block_slices[i]
            xi = x[bi]
            mu_i = z[layout.mu_slices[i]]
            lam_i = z[layout.lam_slices[i]]
            # stationarity rows
            Hrow = game.players[i].cost.hess(x)[bi, :].copy()
            if mu_i.size:
                Hrow[:, bi] += game.private_eq_hess_combo(i, xi, mu_i)
            if lam_i.size:
                Hrow[:, bi] += game.private_ineq_hess_combo(i, xi, lam_i)
            if m0:
                si = factors.scale(i, sigma)
                if np.any(si != 0.0):
                    Hrow += game.shared_hess_combo(x, si)[bi, :]
            J[bi, :n] = Hrow
            if mu_i.size:
                Jh = game.private_eq_jac(i, xi)
                J[bi, layout.mu_slices[i]] = Jh.T
                J[layout.mu_slices[i], bi] = Jh
            if lam_i.size:
                Jg = game.private_ineq_jac(i, xi)
                J[bi, layout.lam_slices[i]] = Jg.T
                J[layout.lam_slices[i], bi] = -Jg
            if m0:
                J[bi, s_sigma] = Js[:, bi].T * factors.diagonals[i][None, :]
        if m0:
            J[s_sigma, :n] = -Js
        return J

    return MCPInstance(layout.dim, F, jac, lo, hi, layout)


def assemble_normalized(game: GameSpec) -> MCPInstance:
    """MCP enforcing identical shared multipliers across players."""
    return assemble_scaled(game, FactorAssignment.identity(game.M, game.m0))


def assemble_full(game: GameSpec) -> MCPInstance:
    """MCP with per-player shared multipliers and duplicated shared rows."""
    layout = _layout(game, game.M)
    lo, hi = _bounds(game, layout)
    M, n, m0 = game.M, game.n, game.m0

    def F(z):
        x = z[:n]
        out = np.empty(layout.dim)
        Js = game.shared_jac(x) if m0 else np.zeros((0, n))
        sval = game.shared_value(x) if m0 else np.zeros(0)
        for i in range(M):
            bi = game.block_slices[i]
            xi = x[bi]
            gi = game.players[i].cost.grad(x)[bi]
            mu_i = z[layout.mu_slices[i]]
            lam_i = z[layout.lam_slices[i]]
            if mu_i.size:
                gi = gi + game.private_eq_jac(i, xi).T @ mu_i
            if lam_i.size:
                gi = gi + game.private_ineq_jac(i, xi).T @ lam_i
            if m0:
                gi = gi + Js[:, bi].T @ z[layout.sigma_slices[i]]
            out[bi] = gi
            out[layout.mu_slices[i]] = game.private_eq(i, xi)
            out[layout.lam_slices[i]] = -game.private_ineq(i, xi)
            if m0:
                out[layout.sigma_slices[i]] = -sval
        return out

    def jac(z):
        x = z[:n]
        J = np.zeros((layout.dim, layout.dim))
        Js = game.shared_jac(x) if m0 else np.zeros((0, n))
        for i in range(M):
            bi = game.block_slices[i]
            xi = x[bi]
            mu_i = z[layout.mu_slices[i]]
            lam_i = z[layout.lam_slices[i]]
            Hrow = game.players[i].cost.hess(x)[bi, :].copy()
            if mu_i.size:
                Hrow[:, bi] += game.private_eq_hess_combo(i, xi, mu_i)
            if lam_i.size:
                Hrow[:, bi] += game.private_ineq_hess_combo(i, xi, lam_i)
            if m0:
                sig_i = z[layout.sigma_slices[i]]
                if np.any(sig_i != 0.0):
                    Hrow += game.shared_hess_combo(x, sig_i)[bi, :]
            J[bi, :n] = Hrow
            if mu_i.size:
                Jh = game.private_eq_jac(i, xi)
                J[bi, layout.mu_slices[i]] = Jh.T
                J[layout.mu_slices[i], bi] = Jh
            if lam_i.size:
                Jg = game.private_ineq_jac(i, xi)
                J[bi, layout.lam_slices[i]] = Jg.T
                J[layout.lam_slices[i], bi] = -Jg
            if m0:
                J[bi, layout.sigma_slices[i]] = Js[:, bi].T
                J[layout.sigma_slices[i], :n] = -Js
        return J

    return MCPInstance(layout.dim, F, jac, lo, hi, layout)


def solution_from_z(game, layout, z, factors=None):
    x, mus, lams, sigma = layout.unpack(z)
    return GNESolution(x=x, mus=mus, lams=lams, sigma=sigma, factors=factors)


def kkt_residual(game: GameSpec, factors: FactorAssignment, sol: GNESolution) -> KKTResidual:
    """Diagnostics of the scaled KKT system at a candidate solution."""
    x = np.asarray(sol.x, dtype=float)
    sigma = np.asarray(sol.sigma, dtype=float)
    Js = game.shared_jac(x) if game.m0 else np.zeros((0, game.n))
    sval = game.shared_value(x)
    stat = np.zeros(game.M)
    p_eq = 0.0
    p_ineq = 0.0
    comp_priv = 0.0
    dual = max(0.0, float(np.max(-sigma)) if sigma.size else 0.0)
    for i in range(game.M):
        bi = game.block_slices[i]
        xi = x[bi]
        gi = game.players[i].cost.grad(x)[bi]
        mu_i = np.asarray(sol.mus[i], dtype=float)
        lam_i = np.asarray(sol.lams[i], dtype=float)
        if mu_i.size:
            gi = gi + game.private_eq_jac(i, xi).T @ mu_i
        if lam_i.size:
            gi = gi + game.private_ineq_jac(i, xi).T @ lam_i
        if game.m0:
            gi = gi + Js[:, bi].T @ factors.scale(i, sigma)
        stat[i] = float(np.max(np.abs(gi))) if gi.size else 0.0
        h = game.private_eq(i, xi)
        if h.size:
            p_eq = max(p_eq, float(np.max(np.abs(h))))
        g = game.private_ineq(i, xi)
        if g.size:
            p_ineq = max(p_ineq, float(np.max(np.maximum(g, 0.0))))
            comp_priv = max(comp_priv, float(np.max(np.abs(lam_i * g))))
            dual = max(dual, float(np.max(np.maximum(-lam_i, 0.0))))
    p_shared = float(np.max(np.maximum(sval, 0.0))) if sval.size else 0.0
    comp_shared = float(np.max(np.abs(sigma * sval))) if sval.size else 0.0
    return KKTResidual(stat, p_eq, p_ineq, p_shared, comp_priv, comp_shared, dual)


def kkt_residual_per_player(game: GameSpec, x, mus, lams, sigmas) -> KKTResidual:
    """Diagnostics of the unscaled stacked KKT system with per-player
    shared multipliers sigma_i (the Theorem-2 round-trip target)."""
    x = np.asarray(x, dtype=float)
    Js = game.shared_jac(x) if game.m0 else np.zeros((0, game.n))
    sval = game.shared_value(x)
    stat = np.zeros(game.M)
    p_eq = p_ineq = comp_priv = comp_shared = dual = 0.0
    for i in range(game.M):
        bi = game.block_slices[i]
        xi = x[bi]
        gi = game.players[i].cost.grad(x)[bi]
        mu_i = np.asarray(mus[i], dtype=float)
        lam_i = np.asarray(lams[i], dtype=float)
        sig_i = np.asarray(sigmas[i], dtype=float)
        if mu_i.size:
            gi = gi + game.private_eq_jac(i, xi).T @ mu_i
        if lam_i.size:
            gi = gi + game.private_ineq_jac(i, xi).T @ lam_i
        if game.m0:
            gi = gi + Js[:, bi].T @ sig_i
        stat[i] = float(np.max(np.abs(gi))) if gi.size else 0.0
        h = game.private_eq(i, xi)
        if h.size:
            p_eq = max(p_eq, float(np.max(np.abs(h))))
        g = game.private_ineq(i, xi)
        if g.size:
            p_ineq = max(p_ineq, float(np.max(np.maximum(g, 0.0))))
            comp_priv = max(comp_priv, float(np.max(np.abs(lam_i * g))))
            dual = max(dual, float(np.max(np.maximum(-lam_i, 0.0))))
        if sval.size:
            comp_shared = max(comp_shared, float(np.max(np.abs(sig_i * sval))))
            dual = max(dual, float(np.max(np.maximum(-sig_i, 0.0))))
    p_shared = float(np.max(np.maximum(sval, 0.0))) if sval.size else 0.0
    return KKTResidual(stat, p_eq, p_ineq, p_shared, comp_priv, comp_shared, dual)


def active_shared(game: GameSpec, x, sigma):
    """Indices of shared constraints classified active at (x, sigma)."""
    sval = game.shared_value(np.asarray(x, dtype=float))
    sigma = np.asarray(sigma, dtype=float)
    return np.flatnonzero((np.abs(sval) <= ACTIVE_S_TOL) & (sigma >= ACTIVE_SIGMA_TOL))
