"""TOML scenario files: declarative games, factor rules, and race setups.

A scenario either names a built-in game (``game.builtin``) or spells out
players with quadratic costs and linear constraints. Sign conventions match
the game module: equalities ``a . x_i + b = 0``, inequalities
``a . x_i + b <= 0``, shared rows ``a . x + b <= 0`` over the full stacked
vector.

Example::

    [game]
    name = "my-game"

    [[player]]
    dim = 1
    cost = { Q = [[2.0, 0.0], [0.0, 0.0]], q = [-2.0, 0.0], c = 1.0 }
    ineq = [{ a = [-1.0], b = 0.0 }]

    [[shared]]
    a = [1.0, 1.0]
    b = -1.0

    [factors]
    rule = "sum-to-one"
    alpha = 0.5
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .functions import QuadraticFunction, linear
from .game import FactorRule, PlayerSpec, build_game, make_factors
from .oracles import example1_game, harker_game, three_car_game
from .racing.game import RaceParams
from .racing.montecarlo import MonteCarloConfig
from .racing.track import Track, l_shaped_track, straight_track


class ScenarioError(ValueError):
    """Malformed scenario file; message carries the offending key path."""


BUILTIN_GAMES = {
    "example1": example1_game,
    "three_car": three_car_game,
    "harker": harker_game,
}

_DEFAULT_RULES = {
    "example1": FactorRule.SUM_TO_ONE,
    "three_car": FactorRule.SUM_TO_ONE,
    "harker": FactorRule.FIRST_PLAYER_IDENTITY,
}


@dataclass
class Scenario:
    """Parsed scenario: the game (when present), factor defaults, race/mc
    tables, and everything needed to reproduce the run."""

    path: str
    name: str
    game: object = None
    builtin: str = None
    rule: FactorRule = None
    alpha: float = None
    race: object = None               # RaceSetup when a [race] table exists
    mc: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


@dataclass
class RaceSetup:
    track: Track
    params: RaceParams
    ego_v_max: float
    opp_v_max: float
    ego_state: tuple                  # (v, psi, s, e)
    opp_state: tuple
    alpha_ego: float
    alpha_opp_model: float
    horizon_seconds: float


def _need(table, key, path):
    if key not in table:
        raise ScenarioError(f"{path}: missing key '{key}'")
    return table[key]


def _vector(v, path):
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: expected a numeric array") from exc
    if arr.ndim != 1:
        raise ScenarioError(f"{path}: expected a flat array")
    return arr


def _cost(table, n_full, path):
    q = _vector(_need(table, "q", path), f"{path}.q")
    if q.size != n_full:
        raise ScenarioError(f"{path}.q: length {q.size}, expected {n_full}")
    c = float(table.get("c", 0.0))
    if "Q" in table:
        Q = np.asarray(table["Q"], dtype=float)
        if Q.shape != (n_full, n_full):
            raise ScenarioError(f"{path}.Q: shape {Q.shape}, expected "
                                f"({n_full}, {n_full})")
    else:
        Q = np.zeros((n_full, n_full))
    return QuadraticFunction(Q, q, c)


def _linear_rows(rows, dim, path):
    out = []
    for j, row in enumerate(rows):
        a = _vector(_need(row, "a", f"{path}[{j}]"), f"{path}[{j}].a")
        if a.size != dim:
            raise ScenarioError(f"{path}[{j}].a: length {a.size}, "
                                f"expected {dim}")
        out.append(linear(a, float(row.get("b", 0.0))))
    return out


def _parse_game(doc, path):
    table = doc.get("game", {})
    builtin = table.get("builtin")
    if builtin is not None:
        if builtin not in BUILTIN_GAMES:
            raise ScenarioError(f"game.builtin: unknown game '{builtin}' "
                                f"(have {sorted(BUILTIN_GAMES)})")
        return BUILTIN_GAMES[builtin](), builtin
    players_tbl = doc.get("player", [])
    if not players_tbl:
        return None, None
    dims = [int(_need(p, "dim", f"player[{i}]"))
            for i, p in enumerate(players_tbl)]
    n_full = sum(dims)
    players = []
    for i, p in enumerate(players_tbl):
        loc = f"player[{i}]"
        cost = _cost(_need(p, "cost", loc), n_full, f"{loc}.cost")
        eq = _linear_rows(p.get("eq", []), dims[i], f"{loc}.eq")
        ineq = _linear_rows(p.get("ineq", []), dims[i], f"{loc}.ineq")
        players.append(PlayerSpec(dims[i], cost, eq_constraints=eq,
                                  ineq_constraints=ineq))
    shared = _linear_rows(doc.get("shared", []), n_full, "shared")
    return build_game(players, shared), None


def _parse_track(table):
    kind = table.get("kind", "l-shaped")
    half_width = float(table.get("half_width", 0.5))
    if kind == "l-shaped":
        return l_shaped_track(straight=float(table.get("straight", 6.0)),
                              radius=float(table.get("radius", 1.0)),
                              half_width=half_width,
                              blend=float(table.get("blend", 0.3)))
    if kind == "straight":
        return straight_track(length=float(table.get("length", 20.0)),
                              half_width=half_width)
    if kind == "segments":
        segs = [(float(L), float(k)) for L, k in _need(table, "segments",
                                                       "race.track")]
        return Track(segs, half_width=half_width,
                     closed=bool(table.get("closed", False)),
                     blend=float(table.get("blend", 0.3)))
    raise ScenarioError(f"race.track.kind: unknown kind '{kind}'")


def _parse_params(table):
    return RaceParams(
        horizon=int(table.get("horizon", 10)),
        dt=float(table.get("dt", 0.1)),
        effort_weight=float(table.get("effort_weight", 0.1)),
        d_safe=float(table.get("d_safe", 0.4)),
        a_max=float(table.get("a_max", 3.0)),
        delta_max=float(table.get("delta_max", 0.4)),
        wheelbase=float(table.get("wheelbase", 0.25)),
    )


def _car(table, path):
    return (float(table.get("v", 1.0)), float(table.get("psi", 0.0)),
            float(_need(table, "s", path)), float(table.get("e", 0.0)))


def _parse_race(doc):
    table = doc.get("race")
    if table is None:
        return None
    track = _parse_track(table.get("track", {}))
    params = _parse_params(table.get("params", {}))
    return RaceSetup(
        track=track,
        params=params,
        ego_v_max=float(table.get("ego_v_max", 3.0)),
        opp_v_max=float(table.get("opp_v_max", 2.85)),
        ego_state=_car(_need(table, "ego", "race"), "race.ego"),
        opp_state=_car(_need(table, "opp", "race"), "race.opp"),
        alpha_ego=float(table.get("alpha_ego", 1.0)),
        alpha_opp_model=float(table.get("alpha_opp_model", 1.0)),
        horizon_seconds=float(table.get("horizon_seconds", 2.0)),
    )


def load_scenario(path):
    """Parse one scenario file; raises ScenarioError with a key-path
    diagnostic on malformed input."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"{path}: no such file")
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: TOML parse error: {exc}")
    game, builtin = _parse_game(doc, path)
    ftab = doc.get("factors", {})
    rule = None
    if "rule" in ftab:
        try:
            rule = FactorRule(ftab["rule"])
        except ValueError:
            raise ScenarioError(
                f"factors.rule: unknown rule '{ftab['rule']}' "
                f"(have {[r.value for r in FactorRule]})")
    elif builtin is not None:
        rule = _DEFAULT_RULES[builtin]
    alpha = float(ftab["alpha"]) if "alpha" in ftab else None
    name = doc.get("game", {}).get("name", builtin or "scenario")
    return Scenario(path=str(path), name=name, game=game, builtin=builtin,
                    rule=rule, alpha=alpha, race=_parse_race(doc),
                    mc=dict(doc.get("mc", {})), raw=doc)


def mc_config_from_scenario(scenario):
    """MonteCarloConfig drawing track/params from the scenario's [race]
    table (defaults when absent) and randomization ranges from [mc]."""
    mc = scenario.mc
    kwargs = {}
    if scenario.race is not None:
        kwargs["track"] = scenario.race.track
        kwargs["params"] = scenario.race.params
        kwargs["ego_v_max"] = scenario.race.ego_v_max
        kwargs["opp_v_max"] = scenario.race.opp_v_max
        kwargs["horizon_seconds"] = scenario.race.horizon_seconds
    for key in ("alpha_aggressive", "alpha_normalized", "opp_position",
                "ego_rel_position", "opp_speed", "ego_rel_speed",
                "ego_lateral_frac", "opp_rel_lateral_frac"):
        if key in mc:
            v = mc[key]
            kwargs[key] = tuple(v) if isinstance(v, list) else float(v)
    return MonteCarloConfig(**kwargs)
