"""
Minute-stepped dispatch environment.

At every minute of the service window the controller decides whether a bus
leaves the terminus. The state describes the trip that *would* leave now,
computed by a lookahead over the passenger queues; the first and last
minutes always dispatch.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from headwayrl.core.exceptions import EpisodeError
from headwayrl.schemas.agent import RewardParams
from headwayrl.schemas.demand import DemandSet
from headwayrl.schemas.line import LineConfig
from headwayrl.schemas.simulation import Timetable
from headwayrl.services.line_model import TravelTimeTable, capacity_at
from headwayrl.services.simulator import StationQueues, TripResult, simulate_trip, stranding_total

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("x1", "x2", "x3", "x4", "x5", "x6")

# Feature groups that can be removed together in the necessity analysis.
FEATURE_GROUPS = {
    "x1x2": ("x1", "x2"),
    "x3": ("x3",),
    "x4": ("x4",),
    "x5": ("x5",),
    "x6": ("x6",),
}


class DemandPredictor(Protocol):
    """Source of the hypothetical-trip quantities behind the state."""

    def lookahead(
        self, queues: StationQueues, line: LineConfig, tt: TravelTimeTable, minute: int, uncapped: bool = False
    ) -> TripResult:
        ...


class OraclePredictor:
    """Uses the recorded future arrivals directly (a perfect forecast)."""

    def lookahead(
        self, queues: StationQueues, line: LineConfig, tt: TravelTimeTable, minute: int, uncapped: bool = False
    ) -> TripResult:
        return simulate_trip(queues, line, tt, minute, commit=False, uncapped=uncapped)


@dataclass(frozen=True)
class StateVector:
    """Six dispatch features, each in [0, 1]."""
    x1: float
    x2: float
    x3: float
    x4: float
    x5: float
    x6: float

    def as_array(self, keep: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        return np.array([getattr(self, name) for name in keep], dtype=np.float64)


def build_state(
    trip: TripResult, minute: int, line: LineConfig, params: RewardParams, e_m: float
) -> Tuple[StateVector, List[str]]:
    """
    Map a hypothetical trip at ``minute`` to its state.

    Returns:
        The state and the names of features that had to be clamped to 1
    """
    clamped = []
    x4 = trip.waiting_total / params.mu
    if x4 > 1.0:
        clamped.append("x4")
        x4 = 1.0
    x5 = trip.capacity_used / e_m
    if x5 > 1.0:
        clamped.append("x5")
        x5 = 1.0
    state = StateVector(
        x1=(minute // 60) / 24.0,
        x2=(minute % 60) / 60.0,
        x3=trip.max_onboard / line.capacity,
        x4=x4,
        x5=x5,
        x6=min(stranding_total(trip) / line.capacity, 1.0),
    )
    return state, clamped


def reward(trip: TripResult, action: int, params: RewardParams, e_m: float) -> float:
    """
    Dispatch reward for the minute-m trip.

    Departing earns the capacity consumption rate; holding earns its
    complement minus the waiting penalty. Both pay ``beta`` per stranding.
    """
    if e_m <= 0:
        raise ValueError("trip capacity must be positive")
    ratio = trip.capacity_used / e_m
    ds = stranding_total(trip)
    if action == 1:
        return ratio - params.beta * ds
    return 1.0 - ratio - params.omega * trip.waiting_total - params.beta * ds


class FeatureScheme(ABC):
    """State and reward definition plugged into the environment."""

    name: str = "scheme"

    def reset(self, env: "HeadwayEnv") -> None:
        """Called once the episode's first minute is set up."""

    def advance(self, env: "HeadwayEnv") -> None:
        """Called after the action at ``env.minute`` is applied, before the clock moves."""

    @abstractmethod
    def state_size(self, line: LineConfig) -> int:
        ...

    @abstractmethod
    def state(self, env: "HeadwayEnv") -> np.ndarray:
        ...

    @abstractmethod
    def reward(self, env: "HeadwayEnv", action: int, trip: TripResult) -> float:
        """Reward for ``action`` at the current minute, evaluated before the trip is committed."""


class DispatchFeatures(FeatureScheme):
    """The six-feature state and the capacity/waiting/stranding reward, optionally with features removed."""

    def __init__(self, drop: Sequence[str] = ()):
        names = set()
        for group in drop:
            if group not in FEATURE_GROUPS:
                raise ValueError(f"unknown feature group {group!r}; choose from {', '.join(FEATURE_GROUPS)}")
            names.update(FEATURE_GROUPS[group])
        self.keep = tuple(n for n in FEATURE_NAMES if n not in names)
        if not self.keep:
            raise ValueError("cannot drop every feature")
        self.name = "full" if not drop else "drop-" + "-".join(drop)

    def state_size(self, line: LineConfig) -> int:
        return len(self.keep)

    def state(self, env: "HeadwayEnv") -> np.ndarray:
        return env.state_vector()[0].as_array(self.keep)

    def reward(self, env: "HeadwayEnv", action: int, trip: TripResult) -> float:
        return reward(trip, action, env.params, env.e_m)


@dataclass
class EnvState:
    """Episode bookkeeping."""
    minute: int
    last_departure: Optional[int]
    departures: List[int] = field(default_factory=list)
    done: bool = False

    @property
    def t_ml(self) -> int:
        """Minutes since the last committed departure (the gap a departure now would create)."""
        return 0 if self.last_departure is None else self.minute - self.last_departure


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    forced: bool = False


class HeadwayEnv:
    """
    One direction of one line over one service day.

    Args:
        line: Line configuration
        tt: Travel-time table
        demand: Passenger demand for the day
        params: Reward weights
        scheme: State/reward scheme, the six-feature scheme by default
        predictor: Lookahead provider, the ground-truth oracle by default
        trace: Keep a per-minute trace of the episode
    """

    def __init__(
        self,
        line: LineConfig,
        tt: TravelTimeTable,
        demand: DemandSet,
        params: Optional[RewardParams] = None,
        scheme: Optional[FeatureScheme] = None,
        predictor: Optional[DemandPredictor] = None,
        trace: bool = False,
    ):
        self.line = line
        self.tt = tt
        self.demand = demand
        self.params = params or RewardParams()
        self.scheme = scheme or DispatchFeatures()
        self.predictor = predictor or OraclePredictor()
        self.keep_trace = trace
        self.e_m = capacity_at(line, line.service_start)
        self.logger = logging.getLogger(__name__)

        self._state: Optional[EnvState] = None
        self.queues: Optional[StationQueues] = None
        self.committed: List[TripResult] = []
        self.trace: List[Dict[str, Any]] = []
        self.clamps: Dict[str, int] = {"x4": 0, "x5": 0}
        self._version = 0
        self._cache: Dict[Tuple[int, int, bool], TripResult] = {}

    @property
    def state_size(self) -> int:
        return self.scheme.state_size(self.line)

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise EpisodeError("reset() has not been called")
        return self._state

    @property
    def minute(self) -> int:
        return self.state.minute

    @property
    def done(self) -> bool:
        return self._state is not None and self._state.done

    @property
    def decision_band(self) -> Tuple[int, int]:
        """Bounds handed to the rule-constrained policy: a departure is forced once the gap reaches T_max."""
        return self.line.min_interval, self.line.max_interval - 1

    def reset(self) -> np.ndarray:
        self.queues = StationQueues(self.demand, self.line.stations)
        self._state = EnvState(minute=self.line.service_start, last_departure=None)
        self.committed = []
        self.trace = []
        self.clamps = {"x4": 0, "x5": 0}
        self._version = 0
        self._cache = {}
        self.scheme.reset(self)
        return self.observe()

    def lookahead(self, uncapped: bool = False) -> TripResult:
        """The trip that would leave at the current minute (cached until the queues change)."""
        key = (self.minute, self._version, uncapped)
        trip = self._cache.get(key)
        if trip is None:
            if len(self._cache) > 8:
                self._cache.clear()
            trip = self.predictor.lookahead(self.queues, self.line, self.tt, self.minute, uncapped=uncapped)
            self._cache[key] = trip
        return trip

    def state_vector(self) -> Tuple[StateVector, List[str]]:
        return build_state(self.lookahead(), self.minute, self.line, self.params, self.e_m)

    def observe(self) -> np.ndarray:
        """State at the current minute; never changes the episode."""
        return self.scheme.state(self)

    def is_forced(self) -> bool:
        m = self.minute
        return m == self.line.service_start or m == self.line.service_end

    def step(self, action: int) -> Transition:
        """
        Apply ``action`` at the current minute and advance one minute.

        The first and last minute of the window always dispatch, whatever
        ``action`` says.

        Raises:
            EpisodeError: the episode is over, or the action is not 0/1.
        """
        st = self.state
        if st.done:
            raise EpisodeError("step() called after the episode ended")
        if action not in (0, 1):
            raise EpisodeError(f"action must be 0 or 1, got {action!r}")

        forced = self.is_forced()
        if forced:
            action = 1

        s = self.observe()
        trip = self.lookahead()
        clamped = []
        if isinstance(self.scheme, DispatchFeatures):
            clamped = self.state_vector()[1]
            for name in clamped:
                self.clamps[name] += 1
        r = float(self.scheme.reward(self, action, trip))
        t_ml = st.t_ml

        if action == 1:
            committed = simulate_trip(self.queues, self.line, self.tt, st.minute, commit=True)
            self.committed.append(committed)
            st.departures.append(st.minute)
            st.last_departure = st.minute
            self._version += 1

        self.scheme.advance(self)

        if self.keep_trace:
            self.trace.append({
                "m": st.minute,
                "state": [float(x) for x in s],
                "action": action,
                "forced": forced,
                "reward": r,
                "t_ml": t_ml,
                "committed": action == 1,
                "clamped": clamped,
            })

        if st.minute >= self.line.service_end:
            st.done = True
            if any(self.clamps.values()):
                self.logger.debug(f"Clamped features this episode: {self.clamps}")
        else:
            st.minute += 1
        s_next = self.observe()
        return Transition(state=s, action=action, reward=r, next_state=s_next, done=st.done, forced=forced)

    def episode_to_timetable(self) -> Timetable:
        if not self.done:
            raise EpisodeError("the episode is not finished")
        return Timetable(departures=tuple(self.state.departures))


def episode_to_timetable(env: HeadwayEnv) -> Timetable:
    return env.episode_to_timetable()
