from .bicycle import CarInput, CarState, bicycle_step
from .game import RaceParams, build_race_game, solve_step
from .montecarlo import MonteCarloConfig, MonteCarloSummary, monte_carlo
from .sim import RaceOutcome, RaceScenario, simulate_closed_loop
from .track import Track, l_shaped_track, straight_track

__all__ = [
    "CarInput", "CarState", "bicycle_step",
    "RaceParams", "build_race_game", "solve_step",
    "MonteCarloConfig", "MonteCarloSummary", "monte_carlo",
    "RaceOutcome", "RaceScenario", "simulate_closed_loop",
    "Track", "l_shaped_track", "straight_track",
]
