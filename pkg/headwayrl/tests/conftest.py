from pathlib import Path

import pytest

from headwayrl.core.rng import make_rng
from headwayrl.schemas.agent import AgentConfig, EpsilonSchedule, RewardParams
from headwayrl.schemas.demand import DemandSet
from headwayrl.schemas.line import LineConfig
from headwayrl.services.line_model import TravelTimeTable
from headwayrl.tests.factories import make_demand, make_line

REPO_ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture
def line() -> LineConfig:
    """Four stations, three passengers per bus, one hour of service."""
    return make_line()


@pytest.fixture
def tt(line: LineConfig) -> TravelTimeTable:
    return TravelTimeTable.constant(line.stations, 2.0)


@pytest.fixture
def demand(line: LineConfig) -> DemandSet:
    """Forty passengers spread over the hour with a burst around minute 630."""
    rng = make_rng(11, "fixture-demand")
    rows = []
    for i in range(40):
        if i < 15:
            t = float(rng.uniform(625, 635))
        else:
            t = float(rng.uniform(598, 656))
        origin = int(rng.integers(1, line.stations))
        dest = int(rng.integers(origin + 1, line.stations + 1))
        rows.append((round(t, 2), origin, dest))
    return make_demand(rows)


@pytest.fixture
def reward_params() -> RewardParams:
    return RewardParams(omega=1.0 / 5000.0, beta=0.2, mu=5000.0)


@pytest.fixture
def tiny_agent() -> AgentConfig:
    """Small enough for a handful of episodes inside a unit test."""
    return AgentConfig(
        hidden_layers=1,
        hidden_units=8,
        learning_rate=0.01,
        gamma=0.4,
        batch_size=8,
        buffer_size=200,
        target_sync_steps=20,
        episodes=3,
        early_stop=False,
        epsilon=EpsilonSchedule(start=1.0, end=0.1, decay_fraction=0.5),
        seed=3,
    )


@pytest.fixture
def configs_dir() -> Path:
    return REPO_ROOT / "configs"
