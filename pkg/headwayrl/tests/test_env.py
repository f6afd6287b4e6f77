from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from headwayrl.core.exceptions import EpisodeError
from headwayrl.schemas.agent import RewardParams
from headwayrl.schemas.demand import DemandSet
from headwayrl.services.agent import random_rollout
from headwayrl.services.env import DispatchFeatures, HeadwayEnv, build_state, reward
from headwayrl.services.line_model import TravelTimeTable, trip_capacity
from headwayrl.services.simulator import StationQueues, simulate_trip, validate_timetable
from headwayrl.tests.factories import make_line


@pytest.fixture
def noon_trip():
    line = make_line(service_start=700, service_end=760)
    tt = TravelTimeTable.constant(line.stations, 2.0)
    return line, simulate_trip(StationQueues(DemandSet(), line.stations), line, tt, 720)


class TestBuildState:
    """Tests for the six dispatch features."""

    def test_noon_with_empty_queues(self, noon_trip, reward_params):
        line, trip = noon_trip
        state, clamped = build_state(trip, 720, line, reward_params, trip_capacity(line))

        assert list(state.as_array()) == [0.5, 0.0, 0.0, 0.0, 0.0, 0.0]
        assert clamped == []

    def test_time_features(self, noon_trip, reward_params):
        line, trip = noon_trip
        state, _ = build_state(trip, 735, line, reward_params, trip_capacity(line))

        assert state.x1 == 0.5
        assert state.x2 == 0.25

    def test_full_bus(self, noon_trip, reward_params):
        line, trip = noon_trip
        state, _ = build_state(replace(trip, max_onboard=line.capacity), 720, line, reward_params, 1.0)

        assert state.x3 == 1.0

    def test_waiting_feature(self, noon_trip, reward_params):
        line, trip = noon_trip
        state, _ = build_state(replace(trip, waiting_total=2500.0), 720, line, reward_params, 1.0)

        assert state.x4 == 0.5

    def test_clamped_features_reported(self, noon_trip, reward_params):
        line, trip = noon_trip
        heavy = replace(trip, waiting_total=12000.0, capacity_used=50)
        state, clamped = build_state(heavy, 720, line, reward_params, 10.0)

        assert state.x4 == 1.0
        assert state.x5 == 1.0
        assert clamped == ["x4", "x5"]

    def test_stranding_feature_capped(self, noon_trip, reward_params):
        line, trip = noon_trip
        state, _ = build_state(replace(trip, stranded=np.array([2, 0, 0])), 720, line, reward_params, 1.0)

        assert state.x6 == pytest.approx(2 / line.capacity)

    def test_drop_group(self, noon_trip, reward_params):
        line, trip = noon_trip
        state, _ = build_state(trip, 720, line, reward_params, 1.0)
        scheme = DispatchFeatures(drop=["x4"])

        assert scheme.state_size(line) == 5
        assert len(state.as_array(scheme.keep)) == 5

    def test_unknown_group(self):
        with pytest.raises(ValueError, match="unknown feature group"):
            DispatchFeatures(drop=["x9"])


class TestReward:
    """Tests for the dispatch reward."""

    def test_depart(self, noon_trip, reward_params):
        _, trip = noon_trip

        assert reward(replace(trip, capacity_used=6), 1, reward_params, 10.0) == pytest.approx(0.6)

    def test_hold_with_waiting(self, noon_trip, reward_params):
        _, trip = noon_trip
        held = replace(trip, capacity_used=6, waiting_total=5000.0)

        assert reward(held, 0, reward_params, 10.0) == pytest.approx(-0.6)

    def test_stranding_penalty(self, noon_trip, reward_params):
        _, trip = noon_trip
        crowded = replace(trip, capacity_used=9, stranded=np.array([3, 2, 0]))

        assert reward(crowded, 1, reward_params, 10.0) == pytest.approx(-0.1)

    @settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(
        used=st.integers(0, 40),
        waiting=st.floats(0.0, 20000.0),
        stranded=st.lists(st.integers(0, 10), min_size=3, max_size=3),
        omega=st.one_of(st.sampled_from([1 / 1000, 1 / 5000, 1 / 7000]), st.floats(0.0, 0.01)),
        beta=st.floats(0.0, 1.0),
    )
    def test_branches_add_up(self, noon_trip, used, waiting, stranded, omega, beta):
        _, trip = noon_trip
        params = RewardParams(omega=omega, beta=beta)
        t = replace(trip, capacity_used=used, waiting_total=waiting, stranded=np.array(stranded))
        total = reward(t, 0, params, 40.0) + reward(t, 1, params, 40.0)

        assert total == pytest.approx(1 - omega * waiting - 2 * beta * sum(stranded), abs=1e-9)

    def test_zero_capacity_rejected(self, noon_trip, reward_params):
        _, trip = noon_trip

        with pytest.raises(ValueError):
            reward(trip, 1, reward_params, 0.0)


class TestHeadwayEnv:
    """Tests for the minute-stepped episode."""

    def test_first_minute_forced(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        env.reset()
        transition = env.step(0)

        assert transition.action == 1
        assert transition.forced
        assert env.state.departures == [600]

    def test_hold_advances_clock_only(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        env.reset()
        env.step(1)
        t_ml = env.state.t_ml
        remaining = env.queues.remaining()

        env.step(0)

        assert env.state.t_ml == t_ml + 1
        assert env.queues.remaining() == remaining

    def test_observe_has_no_side_effects(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        env.reset()
        for _ in range(25):
            env.step(0 if env.state.t_ml < 5 else 1)
        remaining = env.queues.remaining()
        first = env.observe()
        minute = env.minute

        np.testing.assert_array_equal(env.observe(), first)
        assert env.minute == minute
        assert env.queues.remaining() == remaining

    def test_forced_endpoints_only(self, tt, demand):
        line = make_line(max_interval=60)
        env = HeadwayEnv(line, tt, demand)
        env.reset()
        while not env.done:
            env.step(0)

        assert env.episode_to_timetable().departures == (line.service_start, line.service_end)

    def test_episode_length(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        env.reset()
        steps = 0
        while not env.done:
            transition = env.step(1 if env.state.t_ml >= 4 else 0)
            steps += 1

        assert steps == line.window + 1
        assert transition.done

    def test_committed_trips_match_timetable(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        result = random_rollout(env, seed=4)

        assert len(env.committed) == result.metrics.nd == len(result.timetable)
        assert [t.depart_minute for t in env.committed] == list(result.timetable.departures)

    @settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(seed=st.integers(0, 10_000), t_min=st.integers(1, 4), extra=st.integers(0, 8))
    def test_random_rollouts_respect_interval_rules(self, demand, seed, t_min, extra):
        line = make_line(min_interval=t_min, max_interval=t_min + extra)
        env = HeadwayEnv(line, TravelTimeTable.constant(line.stations, 2.0), demand)
        result = random_rollout(env, seed)

        validate_timetable(result.timetable, line)

    def test_deterministic(self, line, tt, demand):
        first = random_rollout(HeadwayEnv(line, tt, demand), seed=9)
        second = random_rollout(HeadwayEnv(line, tt, demand), seed=9)

        assert first.timetable == second.timetable
        assert first.total_reward == second.total_reward

    def test_step_after_done(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        random_rollout(env, seed=1)

        with pytest.raises(EpisodeError):
            env.step(0)

    def test_step_before_reset(self, line, tt, demand):
        with pytest.raises(EpisodeError):
            HeadwayEnv(line, tt, demand).step(0)

    def test_invalid_action(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        env.reset()

        with pytest.raises(EpisodeError):
            env.step(2)

    def test_timetable_before_done(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        env.reset()

        with pytest.raises(EpisodeError):
            env.episode_to_timetable()

    def test_trace(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand, trace=True)
        result = random_rollout(env, seed=2)

        assert len(result.trace) == line.window + 1
        assert result.trace[0]["forced"] and result.trace[-1]["forced"]
        assert sum(row["committed"] for row in result.trace) == result.metrics.nd

    def test_clamps_counted(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand, params=RewardParams(mu=1.0))
        random_rollout(env, seed=2)

        assert env.clamps["x4"] > 0

    def test_reward_uses_pre_commit_trip(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand)
        env.reset()
        env.step(1)
        for _ in range(4):
            env.step(0)
        preview = env.lookahead()
        transition = env.step(1)

        assert transition.reward == pytest.approx(reward(preview, 1, env.params, env.e_m))
