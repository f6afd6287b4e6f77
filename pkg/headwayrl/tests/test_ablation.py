import numpy as np
import pytest

from headwayrl.core.exceptions import ConfigError
from headwayrl.schemas.demand import DemandSet
from headwayrl.services.ablation import (
    STACK_DEPTH, VARIANTS, LoadScheme, StationScheme, ablation_scheme_one, ablation_scheme_two,
    load_reward, necessity_stats, on_road, remaining_seats, running_load, scheme_builder,
    station_reward, waiting_counts
)
from headwayrl.services.env import HeadwayEnv
from headwayrl.services.line_model import trip_capacity
from headwayrl.services.simulator import StationQueues, simulate_trip
from headwayrl.tests.factories import make_demand, make_line


class TestSchemeOne:
    """Tests for the station-level state and the seats-plus-waiting reward."""

    def test_reward_examples(self):
        assert station_reward(0, [0, 0, 0]) == 0
        assert station_reward(10, [5]) == -15

    def test_state_length(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand, scheme=ablation_scheme_one())
        state = env.reset()

        assert env.state_size == 4 * STACK_DEPTH * (line.stations - 1)
        assert state.shape == (env.state_size,)

    def test_snapshot_length(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand, scheme=ablation_scheme_one(stacked=False))

        assert env.reset().shape == (4 * (line.stations - 1),)

    def test_history_padded_then_filled(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand, scheme=StationScheme())
        block = 4 * (line.stations - 1)
        state = env.reset()

        assert np.all(state[:(STACK_DEPTH - 1) * block] == 0.0)
        state = env.step(0).next_state

        np.testing.assert_array_equal(state[(STACK_DEPTH - 2) * block:(STACK_DEPTH - 1) * block], env.scheme.history[-1])
        np.testing.assert_array_equal(state[-block:], env.scheme.snapshot(env))
        for _ in range(STACK_DEPTH):
            env.step(0)
        assert len(env.scheme.history) == STACK_DEPTH - 1

    def test_bus_on_road(self, line, tt):
        env = HeadwayEnv(line, tt, DemandSet(), scheme=StationScheme())
        env.reset()
        env.step(1)

        buses = on_road(env, 601)
        assert len(buses) == 1
        _, segment, frac = buses[0]
        assert segment == 1
        assert frac == pytest.approx(0.5)
        assert remaining_seats(env, 601) == line.seats

    def test_empty_line_rewards(self, line, tt):
        env = HeadwayEnv(line, tt, DemandSet(), scheme=StationScheme())
        env.reset()

        # the forced first departure puts one empty bus on the road
        assert env.step(0).reward == -line.seats
        assert env.step(0).reward == -line.seats
        for _ in range(10):
            env.step(0)
        assert env.step(0).reward == 0.0

    def test_waiting_counts(self, line, tt):
        demand = make_demand([(600.5, 1, 2), (601.0, 1, 3), (603.0, 2, 4)])
        env = HeadwayEnv(line, tt, demand, scheme=StationScheme())
        env.reset()

        assert list(waiting_counts(env, 601.0)) == [2, 0, 0]
        assert list(waiting_counts(env, 603.0)) == [2, 1, 0]

    def test_boarded_passengers_stop_waiting(self, line, tt):
        demand = make_demand([(599.0, 1, 2)])
        env = HeadwayEnv(line, tt, demand, scheme=StationScheme())
        env.reset()
        env.step(1)

        assert list(waiting_counts(env, 601.0)) == [0, 0, 0]


class TestSchemeTwo:
    """Tests for the uncapped-load state and the capacity-gap reward."""

    def test_no_demand_reward(self, line, tt):
        trip = simulate_trip(StationQueues(DemandSet(), line.stations), line, tt, 600, uncapped=True)
        e_m = trip_capacity(line)

        assert load_reward(trip, 1, e_m) == -e_m
        assert load_reward(trip, 0, e_m) == 0.0

    def test_running_load_recurrence(self, line, tt, demand):
        trip = simulate_trip(StationQueues(demand, line.stations), line, tt, 640, uncapped=True)
        p = running_load(trip)

        previous = 0
        for k in range(line.stations):
            assert p[k] == previous + trip.boardings[k] - trip.alightings[k]
            previous = p[k]
        assert p[-1] == 0

    def test_consumed_matches_simulator_when_under_capacity(self, tt):
        line = make_line(capacity=10, seats=10)
        demand = make_demand([(599.0, 1, 3), (600.0, 1, 4), (601.5, 2, 4), (603.0, 3, 4)])
        capped = simulate_trip(StationQueues(demand, line.stations), line, tt, 600)
        uncapped = simulate_trip(StationQueues(demand, line.stations), line, tt, 600, uncapped=True)

        assert running_load(uncapped)[:-1].sum() == capped.capacity_used

    def test_reward_examples_with_demand(self, tt):
        line = make_line(capacity=10, seats=10)
        demand = make_demand([(599.0, 1, 3), (600.0, 1, 4)])
        trip = simulate_trip(StationQueues(demand, line.stations), line, tt, 600, uncapped=True)
        e_m = trip_capacity(line)

        # two boarders covering 2 + 3 segments
        assert load_reward(trip, 1, e_m) == -(e_m - 5) - 2
        assert load_reward(trip, 0, e_m) == -2

    def test_state(self, line, tt):
        crowd = make_demand([(599.0, 1, 4)] * 5)
        env = HeadwayEnv(line, tt, crowd, scheme=ablation_scheme_two())
        state = env.reset()

        assert env.state_size == 3
        assert state[0] == pytest.approx((600 // 60) / 24)
        # uncapped: all five board although C_max is three
        assert state[1] == pytest.approx(5 / line.capacity)
        assert state[2] == 0.0

    def test_time_since_departure(self, line, tt, demand):
        env = HeadwayEnv(line, tt, demand, scheme=LoadScheme())
        env.reset()
        env.step(1)
        state = env.step(0).next_state

        assert state[2] == pytest.approx(2 / line.max_interval)


class TestVariants:
    """Tests for variant tags and the necessity statistics."""

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_every_variant_builds(self, variant, line, tt, demand):
        env = HeadwayEnv(line, tt, demand, scheme=scheme_builder(variant)())

        assert env.reset().shape == (env.state_size,)

    def test_drop_feature_state_size(self, line):
        assert scheme_builder("drop-feature:x4")().state_size(line) == 5
        assert scheme_builder("drop-feature:x1x2")().state_size(line) == 4

    @pytest.mark.parametrize("variant", ["scheme-three", "drop-feature:x9", ""])
    def test_unknown_variant(self, variant):
        with pytest.raises(ConfigError):
            scheme_builder(variant)

    def test_builder_returns_fresh_schemes(self):
        builder = scheme_builder("scheme-one")

        assert builder() is not builder()

    def test_necessity_stats(self):
        row = necessity_stats("drop-feature:x4", [10, 12, 12, 14], [-1.0, -0.5, -0.5, 0.0])

        assert row["variant"] == "drop-feature:x4"
        assert (row["nd_max"], row["nd_min"], row["nd_mode"]) == (14.0, 10.0, 12.0)
        assert row["nd_variance"] == pytest.approx(2.0)
        assert row["reward_mode"] == -0.5
        assert row["reward_variance"] == pytest.approx(0.125)

    def test_single_value(self):
        row = necessity_stats("full", [7], [0.25])

        assert row["nd_max"] == row["nd_min"] == row["nd_mode"] == 7.0
        assert row["nd_variance"] == 0.0

    def test_no_episodes(self):
        with pytest.raises(ValueError):
            necessity_stats("full", [], [])
