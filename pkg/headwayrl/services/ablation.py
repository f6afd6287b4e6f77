"""
Alternative state/reward schemes and the feature-necessity statistics.

Scheme one describes every station (waiting passengers, arrivals over the
next quarter hour, bus presence and bus progress per segment) and penalises
empty seats plus waiting passengers. Scheme two keeps the hour, the
uncapped peak load of the would-be trip and the time since the last
departure, and rewards closing the gap between capacity and load.
"""

import logging
from collections import deque
from typing import Any, Callable, Deque, Dict, List, Sequence, Tuple

import numpy as np
from scipy import stats

from headwayrl.core.exceptions import ConfigError
from headwayrl.schemas.line import LineConfig
from headwayrl.services.env import FEATURE_GROUPS, DispatchFeatures, FeatureScheme, HeadwayEnv
from headwayrl.services.simulator import TripResult

logger = logging.getLogger(__name__)

ARRIVAL_HORIZON = 15
STACK_DEPTH = 4

STATS_COLUMNS = [
    "variant", "nd_max", "nd_min", "nd_mode", "nd_variance",
    "reward_max", "reward_min", "reward_mode", "reward_variance",
]


def on_road(env: HeadwayEnv, minute: float) -> List[Tuple[TripResult, int, float]]:
    """
    Buses between stations at ``minute``.

    Returns:
        (trip, segment k, fraction of segment k covered) for each bus on the road
    """
    buses = []
    for trip in env.committed:
        times = trip.station_arrivals
        if not times[0] <= minute < times[-1]:
            continue
        k = int(np.searchsorted(times, minute, side="right"))
        span = times[k] - times[k - 1]
        frac = (minute - times[k - 1]) / span if span > 0 else 0.0
        buses.append((trip, k, float(frac)))
    return buses


def remaining_seats(env: HeadwayEnv, minute: float) -> int:
    """Empty seats summed over buses on the road (standing room not counted)."""
    seats = env.line.seats
    return sum(max(seats - int(trip.onboard_profile[k - 1]), 0) for trip, k, _ in on_road(env, minute))


def waiting_counts(env: HeadwayEnv, minute: float) -> np.ndarray:
    return np.array([env.queues.waiting_at(k, minute) for k in range(1, env.line.stations)], dtype=np.float64)


class StationScheme(FeatureScheme):
    """
    Station-level state, stacked over the last four minutes unless ``stacked`` is off.

    Counts are divided by C_max before they reach the network.
    """

    def __init__(self, stacked: bool = True):
        self.stacked = stacked
        self.name = "scheme-one" if stacked else "scheme-one-snapshot"
        self.history: Deque[np.ndarray] = deque(maxlen=STACK_DEPTH - 1)

    def snapshot_size(self, line: LineConfig) -> int:
        return 4 * (line.stations - 1)

    def state_size(self, line: LineConfig) -> int:
        return self.snapshot_size(line) * (STACK_DEPTH if self.stacked else 1)

    def snapshot(self, env: HeadwayEnv) -> np.ndarray:
        m = env.minute
        segments = env.line.stations - 1
        waiting = waiting_counts(env, m)
        upcoming = np.array(
            [env.queues.arriving_between(k, m, m + ARRIVAL_HORIZON) for k in range(1, env.line.stations)],
            dtype=np.float64,
        )
        presence = np.zeros(segments)
        progress = np.zeros(segments)
        for _, k, frac in on_road(env, m):
            presence[k - 1] = 1.0
            # the bus nearest the next station matters most
            progress[k - 1] = max(progress[k - 1], frac)
        scale = 1.0 / env.line.capacity
        return np.concatenate([waiting * scale, upcoming * scale, presence, progress])

    def reset(self, env: HeadwayEnv) -> None:
        self.history.clear()

    def advance(self, env: HeadwayEnv) -> None:
        if self.stacked:
            self.history.append(self.snapshot(env))

    def state(self, env: HeadwayEnv) -> np.ndarray:
        current = self.snapshot(env)
        if not self.stacked:
            return current
        pad = [np.zeros_like(current)] * (STACK_DEPTH - 1 - len(self.history))
        return np.concatenate(pad + list(self.history) + [current])

    def reward(self, env: HeadwayEnv, action: int, trip: TripResult) -> float:
        m = env.minute
        seats = remaining_seats(env, m)
        waiting = waiting_counts(env, m)
        if action == 1:
            # the departing bus joins the road and clears station 1
            seats += max(env.line.seats - int(trip.onboard_profile[0]), 0)
            waiting[0] -= int(trip.boardings[0])
        return station_reward(seats, waiting)


def station_reward(remaining: int, waiting: Sequence[int]) -> float:
    """-(empty seats on the road + passengers waiting at stations)."""
    return -float(remaining + sum(waiting))


def running_load(trip: TripResult) -> np.ndarray:
    """p_m^k = p_m^{k-1} + boarders_k - alighters_k, for k = 1..K."""
    return np.cumsum(trip.boardings - trip.alightings)


class LoadScheme(FeatureScheme):
    """Hour, uncapped peak load and time since departure; capacity-gap reward."""

    name = "scheme-two"

    def state_size(self, line: LineConfig) -> int:
        return 3

    def state(self, env: HeadwayEnv) -> np.ndarray:
        trip = env.lookahead(uncapped=True)
        m = env.minute
        peak = float(running_load(trip).max()) if trip.boardings.size else 0.0
        return np.array([
            (m // 60) / 24.0,
            peak / env.line.capacity,
            env.state.t_ml / env.line.max_interval,
        ])

    def reward(self, env: HeadwayEnv, action: int, trip: TripResult) -> float:
        uncapped = env.lookahead(uncapped=True)
        return load_reward(uncapped, action, env.e_m)


def load_reward(trip: TripResult, action: int, e_m: float) -> float:
    """
    Departing pays the unused capacity of the trip plus the passengers it
    would pick up; holding pays those passengers only.

    Consumed capacity is the sum of running loads over segments.
    """
    waiting = float(trip.boardings.sum())
    if action == 0:
        return -waiting
    consumed = float(running_load(trip)[:-1].sum())
    return -(e_m - consumed) - waiting


def ablation_scheme_one(stacked: bool = True) -> StationScheme:
    return StationScheme(stacked=stacked)


def ablation_scheme_two() -> LoadScheme:
    return LoadScheme()


VARIANTS = ["full", "scheme-one", "scheme-one-snapshot", "scheme-two"] + [f"drop-feature:{g}" for g in FEATURE_GROUPS]


def scheme_builder(variant: str) -> Callable[[], FeatureScheme]:
    """
    Map a variant tag to a factory of fresh scheme instances.

    Raises:
        ConfigError: unknown variant or feature group.
    """
    if variant == "full":
        return DispatchFeatures
    if variant == "scheme-one":
        return lambda: StationScheme(stacked=True)
    if variant == "scheme-one-snapshot":
        return lambda: StationScheme(stacked=False)
    if variant == "scheme-two":
        return LoadScheme
    if variant.startswith("drop-feature:"):
        group = variant.split(":", 1)[1]
        if group not in FEATURE_GROUPS:
            raise ConfigError(f"unknown feature group {group!r}; choose from {', '.join(FEATURE_GROUPS)}")
        return lambda: DispatchFeatures(drop=[group])
    raise ConfigError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")


def _mode(values: np.ndarray) -> float:
    # smallest of the most frequent values
    return float(stats.mode(values, keepdims=False).mode)


def necessity_stats(variant: str, nds: Sequence[float], rewards: Sequence[float]) -> Dict[str, Any]:
    """
    {max, min, mode, variance} of departures and mean episode reward.

    Variance is the population variance over the episodes given.
    """
    nd = np.asarray(nds, dtype=np.float64)
    rw = np.asarray(rewards, dtype=np.float64)
    if nd.size == 0:
        raise ValueError("no episodes to summarise")
    return {
        "variant": variant,
        "nd_max": float(nd.max()),
        "nd_min": float(nd.min()),
        "nd_mode": _mode(nd),
        "nd_variance": float(np.var(nd)),
        "reward_max": float(rw.max()),
        "reward_min": float(rw.min()),
        "reward_mode": _mode(np.round(rw, 4)),
        "reward_variance": float(np.var(rw)),
    }
