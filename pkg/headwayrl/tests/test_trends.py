"""
Long-running behavioural checks on mid-sized synthetic lines.

Deselected by default; run with ``pytest -m slow``.
"""

import numpy as np
import pytest

from headwayrl.schemas.agent import OMEGA_PRESETS, AgentConfig, EpsilonSchedule, RewardParams
from headwayrl.schemas.baselines import GAParams
from headwayrl.schemas.demand import GaussianPeak, SyntheticDemandSpec
from headwayrl.schemas.experiment import ExperimentConfig
from headwayrl.schemas.simulation import Timetable
from headwayrl.services.agent import default_env_factory, greedy_rollout, random_rollout, train
from headwayrl.services.env import HeadwayEnv
from headwayrl.services.experiments import MethodSpec, checkpoint_meta, run_scenario, run_sweep
from headwayrl.services.line_model import TravelTimeTable
from headwayrl.services.network import save_checkpoint
from headwayrl.services.od_data import generate_synthetic
from headwayrl.services.simulator import validate_timetable, write_timetable
from headwayrl.tests.factories import make_line

pytestmark = pytest.mark.slow

RATES = [0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7]
SHIFTS = [0.0, -180.0, -120.0, -60.0, 60.0, 120.0]
OMEGAS = [1 / 11000, 1 / 5000, 1 / 2000, 1 / 1000, 1 / 500, 1 / 110]


@pytest.fixture(scope="module")
def corridor():
    line = make_line(
        stations=6, seats=20, capacity=40, service_start=420, service_end=600, min_interval=3, max_interval=15,
    )
    tt = TravelTimeTable.constant(line.stations, 3.0)
    spec = SyntheticDemandSpec(
        stations=line.stations,
        passengers=900,
        window_start=400,
        window_end=600,
        peaks=[GaussianPeak(center=480, width=20)],
        base_rate=0.002,
    )
    return line, tt, generate_synthetic(spec, seed=17)


@pytest.fixture(scope="module")
def long_corridor():
    """Six hours of service, room for the peak to move three hours either way."""
    line = make_line(
        stations=6, seats=40, capacity=80, service_start=360, service_end=720, min_interval=3, max_interval=15,
    )
    tt = TravelTimeTable.constant(line.stations, 3.0)
    spec = SyntheticDemandSpec(
        stations=line.stations,
        passengers=1000,
        window_start=340,
        window_end=720,
        peaks=[GaussianPeak(center=540, width=20)],
        base_rate=0.002,
    )
    return line, tt, generate_synthetic(spec, seed=19)


def agent_config(**overrides) -> AgentConfig:
    values = dict(
        hidden_layers=2, hidden_units=32, learning_rate=0.001, gamma=0.4, batch_size=32, buffer_size=5000,
        target_sync_steps=200, episodes=80, early_stop=False, seed=5,
        epsilon=EpsilonSchedule(start=1.0, end=0.05, decay_fraction=0.6),
    )
    values.update(overrides)
    return AgentConfig(**values)


def experiment_config(**agent_overrides) -> ExperimentConfig:
    return ExperimentConfig(
        agent=agent_config(**agent_overrides),
        reward=RewardParams(),
        ga=GAParams(population=20, generations=20, ls_budget=20),
    )


def inversions(values) -> int:
    return sum(1 for a, b in zip(values, values[1:]) if b < a)


def trained_checkpoint(line, tt, demand, config, path):
    result = train(default_env_factory(config.reward), line, tt, demand, config.agent)
    meta = checkpoint_meta("full", config.reward, config.agent, result.state_size, line)
    return result, str(save_checkpoint(result.network, path, meta))


@pytest.fixture(scope="module")
def trained(corridor, tmp_path_factory):
    line, tt, demand = corridor
    config = experiment_config()
    result, path = trained_checkpoint(line, tt, demand, config, tmp_path_factory.mktemp("ckpt") / "model.ckpt")
    return config, result, path


def rows_for(rows, method):
    return [row for row in rows if row["method"] == method]


class TestLearning:
    def test_reward_improves(self, trained):
        _, result, _ = trained
        rewards = [row["mean_reward"] for row in result.curve]

        assert np.mean(rewards[-10:]) > np.mean(rewards[:10])

    def test_greedy_beats_random_by_three_standard_errors(self, corridor, trained):
        line, tt, demand = corridor
        config, result, _ = trained
        env = HeadwayEnv(line, tt, demand, params=config.reward)

        greedy = greedy_rollout(env, result.network).mean_reward
        random_rewards = np.array([random_rollout(env, seed).mean_reward for seed in range(20)])
        standard_error = random_rewards.std(ddof=1) / np.sqrt(len(random_rewards))

        assert greedy > random_rewards.mean() + 3 * standard_error

    def test_heavier_waiting_penalty_dispatches_more(self, corridor):
        line, tt, demand = corridor
        nds = {}
        for preset in ("waiting", "departures"):
            reward = RewardParams(omega=OMEGA_PRESETS[preset])
            result = train(default_env_factory(reward), line, tt, demand, agent_config())
            nds[preset] = result.metrics.nd

        assert nds["waiting"] >= nds["departures"]


class TestSamplingRate:
    """A trained controller adds departures as demand grows; frozen timetables cannot."""

    @pytest.fixture(scope="class")
    def rows(self, corridor, trained, tmp_path_factory):
        line, tt, demand = corridor
        config, _, checkpoint = trained
        manual = write_timetable(
            Timetable(departures=tuple(range(line.service_start, line.service_end + 1, 6))),
            tmp_path_factory.mktemp("manual") / "timetable.csv",
        )
        methods = [MethodSpec("dqn", checkpoint), MethodSpec("ga"), MethodSpec("manual", str(manual))]
        return run_scenario(line, tt, demand, "sample", RATES, methods, config, seed=23)

    def test_controller_departures_follow_demand(self, rows):
        nd = [row["nd"] for row in rows_for(rows, "dqn:model.ckpt")]

        assert len(nd) == len(RATES)
        assert inversions(nd) <= 1
        assert nd[-1] >= nd[0]

    def test_controller_waiting_falls_with_demand(self, rows):
        awt = [row["awt"] for row in rows_for(rows, "dqn:model.ckpt")]

        assert inversions([-a for a in awt]) <= 1
        assert awt[-1] <= awt[0]

    @pytest.mark.parametrize("method", ["ga", "manual:timetable.csv"])
    def test_frozen_timetable_departures_constant(self, rows, method):
        frozen = rows_for(rows, method)

        assert len(frozen) == len(RATES)
        assert len({row["nd"] for row in frozen}) == 1


class TestPeakShift:
    def test_controller_absorbs_moved_peak(self, long_corridor, tmp_path):
        line, tt, demand = long_corridor
        config = experiment_config(episodes=60)
        _, checkpoint = trained_checkpoint(line, tt, demand, config, tmp_path / "model.ckpt")
        methods = [MethodSpec("dqn", checkpoint), MethodSpec("ga")]

        rows = run_scenario(line, tt, demand, "shift", SHIFTS, methods, config, seed=29, window=(480, 600))

        controller = {row["setting"]: row for row in rows_for(rows, "dqn:model.ckpt")}
        frozen = {row["setting"]: row for row in rows_for(rows, "ga")}
        assert all(row["nsp"] == 0 for row in controller.values())
        assert frozen[-180.0]["nsp"] > frozen[0.0]["nsp"]


class TestWaitingWeightSweep:
    def test_rank_correlation_with_omega(self, corridor):
        line, tt, demand = corridor
        config = experiment_config(episodes=60)

        _, run_rows, summary = run_sweep("omega", OMEGAS, 2, line, tt, demand, config, seed=31)

        assert len(run_rows) == 2 * len(OMEGAS)
        assert summary["spearman_nd"] >= 0.8
        assert summary["spearman_awt"] <= -0.8


class TestRuleSafety:
    def test_random_rollouts_always_valid(self):
        line = make_line()
        tt = TravelTimeTable.constant(line.stations, 2.0)
        env = HeadwayEnv(line, tt, generate_synthetic(
            SyntheticDemandSpec(stations=line.stations, passengers=60, window_start=590, window_end=660, base_rate=1.0),
            seed=2,
        ))

        for seed in range(10_000):
            result = random_rollout(env, seed)
            validate_timetable(result.timetable, line)
