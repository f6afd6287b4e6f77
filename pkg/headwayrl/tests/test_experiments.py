import pytest

from headwayrl.core.exceptions import ArtifactError, ConfigError
from headwayrl.schemas.baselines import GAParams
from headwayrl.schemas.experiment import ExperimentConfig
from headwayrl.schemas.simulation import Timetable
from headwayrl.services.agent import train
from headwayrl.services.experiments import (
    MethodSpec, checkpoint_meta, policy_timetable, run_ablation, run_cells, run_scenario, run_sweep,
    transformed_demand
)
from headwayrl.services.network import load_checkpoint, save_checkpoint
from headwayrl.services.simulator import evaluate_timetable, write_timetable


def square(x: int) -> int:
    return x * x


@pytest.fixture
def experiment(tiny_agent) -> ExperimentConfig:
    return ExperimentConfig(
        agent=tiny_agent.model_copy(update={"episodes": 2}),
        ga=GAParams(population=6, generations=2),
        evaluation_episodes=2,
    )


@pytest.fixture
def manual_csv(tmp_path, line):
    timetable = Timetable(departures=tuple(range(line.service_start, line.service_end + 1, 5)))
    return str(write_timetable(timetable, tmp_path / "manual.csv")), timetable


@pytest.fixture
def checkpoint(tmp_path, line, tt, demand, experiment):
    result = train(None, line, tt, demand, experiment.agent)
    meta = checkpoint_meta("full", experiment.reward, experiment.agent, result.state_size, line)
    return str(save_checkpoint(result.network, tmp_path / "model.ckpt", meta))


class TestRunCells:
    def test_serial_keeps_order(self):
        assert run_cells(square, [3, 1, 2]) == [9, 1, 4]

    def test_pool_keeps_order(self):
        assert run_cells(square, list(range(6)), jobs=2) == [0, 1, 4, 9, 16, 25]


class TestMethodSpec:
    @pytest.mark.parametrize(
        "text, kind, path",
        [("ga", "ga", None), ("memetic", "memetic", None), ("dqn:out/model.ckpt", "dqn", "out/model.ckpt"),
         ("manual:tt.csv", "manual", "tt.csv")],
    )
    def test_parse(self, text, kind, path):
        spec = MethodSpec.parse(text)

        assert (spec.kind, spec.path) == (kind, path)

    @pytest.mark.parametrize("text", ["dqn", "manual:", "sa", "ga:file"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            MethodSpec.parse(text)

    def test_label_uses_file_name(self):
        assert MethodSpec.parse("dqn:out/run1/model.ckpt").label == "dqn:model.ckpt"


class TestTransformedDemand:
    def test_identities(self, demand):
        assert transformed_demand(demand, "shift", 0.0, (900, 1080), 7) == demand
        assert transformed_demand(demand, "sample", 1.0, (900, 1080), 7) == demand

    def test_bad_setting(self, demand):
        with pytest.raises(ConfigError):
            transformed_demand(demand, "sample", 0.0, (900, 1080), 7)

    def test_unknown_transform(self, demand):
        with pytest.raises(ConfigError):
            transformed_demand(demand, "mirror", 1.0, (900, 1080), 7)


class TestRunScenario:
    """Tests for the dynamic-scenario comparison."""

    def test_fixed_timetable_keeps_departures(self, line, tt, demand, experiment, manual_csv):
        path, timetable = manual_csv
        rows = run_scenario(
            line, tt, demand, "sample", [1.0, 0.5, 1.5], [MethodSpec.parse(f"manual:{path}")], experiment, seed=7,
        )

        assert [r["setting"] for r in rows] == [1.0, 0.5, 1.5]
        assert {r["nd"] for r in rows} == {len(timetable)}

    def test_identity_row_matches_evaluation(self, line, tt, demand, experiment, manual_csv):
        path, timetable = manual_csv
        rows = run_scenario(
            line, tt, demand, "shift", [0], [MethodSpec.parse(f"manual:{path}")], experiment, seed=7,
            window=(620, 640),
        )
        metrics, _ = evaluate_timetable(demand, line, tt, timetable)

        assert (rows[0]["nd"], rows[0]["awt"], rows[0]["nsp"], rows[0]["unserved"]) == (
            metrics.nd, metrics.awt, metrics.nsp, metrics.unserved
        )

    def test_searched_timetable_frozen(self, line, tt, demand, experiment):
        rows = run_scenario(line, tt, demand, "sample", [1.0, 0.5, 1.7], [MethodSpec("ga")], experiment, seed=3)

        assert len({r["nd"] for r in rows}) == 1
        assert all(r["method"] == "ga" for r in rows)

    def test_controller_rolls_out_per_setting(self, line, tt, demand, experiment, checkpoint):
        rows = run_scenario(
            line, tt, demand, "sample", [1.0, 1.5], [MethodSpec.parse(f"dqn:{checkpoint}")], experiment, seed=3,
        )

        assert [r["method"] for r in rows] == ["dqn:model.ckpt"] * 2
        assert all(r["nd"] >= 2 for r in rows)

    def test_same_rows_with_pool(self, line, tt, demand, experiment, manual_csv):
        path, _ = manual_csv
        methods = [MethodSpec.parse(f"manual:{path}")]
        serial = run_scenario(line, tt, demand, "sample", [1.0, 0.7, 1.3], methods, experiment, seed=5)
        pooled = run_scenario(line, tt, demand, "sample", [1.0, 0.7, 1.3], methods, experiment, seed=5, jobs=2)

        assert serial == pooled

    def test_no_settings(self, line, tt, demand, experiment):
        with pytest.raises(ConfigError):
            run_scenario(line, tt, demand, "sample", [], [MethodSpec("ga")], experiment, seed=1)


class TestPolicyTimetable:
    def test_state_size_mismatch(self, line, tt, demand, checkpoint):
        network, meta = load_checkpoint(checkpoint)
        meta["variant"] = "scheme-two"

        with pytest.raises(ArtifactError, match="state features"):
            policy_timetable(network, meta, line, tt, demand)

    def test_greedy_rollout_is_valid(self, line, tt, demand, checkpoint):
        network, meta = load_checkpoint(checkpoint)
        timetable, metrics = policy_timetable(network, meta, line, tt, demand)

        assert timetable.departures[0] == line.service_start
        assert metrics.nd == len(timetable)


class TestRunSweep:
    """Tests for the omega and gamma sweeps."""

    def test_omega(self, line, tt, demand, experiment):
        rows, run_rows, summary = run_sweep("omega", [1 / 1000, 1 / 7000], 1, line, tt, demand, experiment, seed=7)

        assert [r["omega"] for r in rows] == [1 / 1000, 1 / 7000]
        assert all(r["nd_max"] == r["nd_min"] == r["nd_mode"] for r in rows)
        assert len(run_rows) == 2
        assert summary["param"] == "omega"
        assert "spearman_nd" in summary

    def test_gamma_repeats(self, line, tt, demand, experiment):
        rows, run_rows, _ = run_sweep("gamma", [0.0, 0.4], 2, line, tt, demand, experiment, seed=7)

        assert [r["gamma"] for r in rows] == [0.0, 0.4]
        assert [r["repeat"] for r in run_rows] == [1, 2, 1, 2]
        # repeats share seeds across values
        assert run_rows[0]["seed"] == run_rows[2]["seed"]
        assert all(r["nd_std_min"] <= r["nd_std_mean"] <= r["nd_std_max"] for r in rows)

    @pytest.mark.parametrize(
        "param, values, repeats",
        [("beta", [0.1], 1), ("omega", [], 1), ("omega", [0.001], 0)],
    )
    def test_rejects(self, line, tt, demand, experiment, param, values, repeats):
        with pytest.raises(ConfigError):
            run_sweep(param, values, repeats, line, tt, demand, experiment, seed=7)

    def test_invalid_gamma_value(self, line, tt, demand, experiment):
        with pytest.raises(ValueError):
            run_sweep("gamma", [1.0], 1, line, tt, demand, experiment, seed=7)


class TestRunAblation:
    def test_drop_feature(self, line, tt, demand, experiment):
        result, row = run_ablation("drop-feature:x4", line, tt, demand, experiment, seed=7)

        assert result.state_size == 5
        assert row["variant"] == "drop-feature:x4"
        assert len(result.curve) == experiment.agent.episodes

    def test_scheme_one_completes(self, line, tt, demand, experiment):
        result, row = run_ablation("scheme-one", line, tt, demand, experiment, seed=7)

        assert result.state_size == 16 * (line.stations - 1)
        assert row["nd_min"] <= row["nd_max"]

    def test_zero_episodes(self, line, tt, demand, experiment):
        config = experiment.model_copy(update={"agent": experiment.agent.model_copy(update={"episodes": 0})})

        with pytest.raises(ConfigError):
            run_ablation("full", line, tt, demand, config, seed=7)
