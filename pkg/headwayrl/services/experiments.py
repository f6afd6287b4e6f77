"""
Experiment drivers: dynamic scenarios, parameter sweeps and ablations.

Each study is a grid of independent cells. Cells run in a process pool
when more than one job is requested; results always come back in cell
order, so the output does not depend on the job count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy import stats

from headwayrl.core.exceptions import ArtifactError, ConfigError
from headwayrl.core.rng import derive_seed
from headwayrl.schemas.agent import AgentConfig, RewardParams
from headwayrl.schemas.demand import DemandSet
from headwayrl.schemas.experiment import ExperimentConfig
from headwayrl.schemas.line import LineConfig
from headwayrl.schemas.simulation import Metrics, Timetable
from headwayrl.services.ablation import necessity_stats, scheme_builder
from headwayrl.services.agent import TrainingResult, default_env_factory, greedy_rollout, train
from headwayrl.services.baselines import SEARCHES
from headwayrl.services.line_model import TravelTimeTable
from headwayrl.services.network import ValueNetwork, load_checkpoint
from headwayrl.services.od_data import resample, shift_peak
from headwayrl.services.simulator import evaluate_timetable, load_timetable

logger = logging.getLogger(__name__)

CellT = TypeVar("CellT")

SCENARIO_COLUMNS = ["method", "transform", "setting", "nd", "awt", "nsp", "unserved"]
OMEGA_COLUMNS = ["omega", "repeats", "nd_max", "nd_min", "nd_mode", "awt_max", "awt_min", "awt_mean"]
GAMMA_COLUMNS = ["gamma", "repeats", "nd_std_mean", "nd_std_min", "nd_std_max"]
SWEEP_RUN_COLUMNS = ["param", "value", "repeat", "seed", "nd", "awt", "nsp", "episodes", "nd_std"]


def run_cells(fn: Callable[[CellT], Any], cells: Sequence[CellT], jobs: int = 1) -> List[Any]:
    """Apply ``fn`` to every cell, in a process pool when ``jobs > 1``; results keep cell order."""
    if jobs <= 1 or len(cells) <= 1:
        return [fn(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=min(jobs, len(cells))) as executor:
        return list(executor.map(fn, cells))


def cell_seed(seed: int, *parts: Any) -> int:
    return derive_seed(seed, *parts) & 0x7FFFFFFF


def checkpoint_meta(variant: str, reward: RewardParams, agent: AgentConfig, state_size: int, line: LineConfig) -> Dict[str, Any]:
    return {
        "variant": variant,
        "reward": reward.model_dump(),
        "agent": agent.model_dump(mode="json"),
        "seed": agent.seed,
        "state_size": state_size,
        "line_id": line.line_id,
    }


def policy_timetable(
    network: ValueNetwork, meta: Dict[str, Any], line: LineConfig, tt: TravelTimeTable, demand: DemandSet
) -> Tuple[Timetable, Metrics]:
    """Roll a trained controller greedily over ``demand``."""
    variant = meta.get("variant", "full")
    params = RewardParams(**meta.get("reward", {}))
    env = default_env_factory(params, scheme_builder(variant))(line, tt, demand)
    if env.state_size != network.state_size:
        raise ArtifactError(
            f"checkpoint expects {network.state_size} state features, variant {variant} on this line gives {env.state_size}"
        )
    result = greedy_rollout(env, network)
    return result.timetable, result.metrics


# Scenarios

@dataclass(frozen=True)
class MethodSpec:
    """A compared method: ``dqn:CKPT``, ``ga``, ``memetic`` or ``manual:CSV``."""
    kind: str
    path: Optional[str] = None

    @property
    def label(self) -> str:
        return self.kind if self.path is None else f"{self.kind}:{Path(self.path).name}"

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        kind, _, path = text.partition(":")
        if kind in ("ga", "memetic") and not path:
            return cls(kind)
        if kind in ("dqn", "manual") and path:
            return cls(kind, path)
        raise ConfigError(f"unknown method {text!r}; use dqn:CKPT, ga, memetic or manual:CSV")


def transformed_demand(base: DemandSet, transform: str, setting: float, window: Tuple[int, int], seed: int) -> DemandSet:
    try:
        if transform == "shift":
            return shift_peak(base, window, setting)
        if transform == "sample":
            return resample(base, setting, cell_seed(seed, "sample", repr(float(setting))))
    except ValueError as e:
        raise ConfigError(f"{transform} {setting}: {e}") from e
    raise ConfigError(f"unknown transform {transform!r}; use shift or sample")


@dataclass(frozen=True)
class ScenarioCell:
    method: str
    transform: str
    setting: float
    line: LineConfig
    tt: TravelTimeTable
    base: DemandSet
    window: Tuple[int, int]
    seed: int
    timetable: Optional[Timetable] = None
    network: Optional[ValueNetwork] = None
    meta: Optional[Dict[str, Any]] = None


def _scenario_cell(cell: ScenarioCell) -> Dict[str, Any]:
    demand = transformed_demand(cell.base, cell.transform, cell.setting, cell.window, cell.seed)
    if cell.network is not None:
        _, metrics = policy_timetable(cell.network, cell.meta or {}, cell.line, cell.tt, demand)
    else:
        metrics, _ = evaluate_timetable(demand, cell.line, cell.tt, cell.timetable)
    return {
        "method": cell.method,
        "transform": cell.transform,
        "setting": cell.setting,
        "nd": metrics.nd,
        "awt": metrics.awt,
        "nsp": metrics.nsp,
        "unserved": metrics.unserved,
    }


def run_scenario(
    line: LineConfig,
    tt: TravelTimeTable,
    base: DemandSet,
    transform: str,
    settings: Sequence[float],
    methods: Sequence[MethodSpec],
    config: ExperimentConfig,
    seed: int,
    window: Optional[Tuple[int, int]] = None,
    jobs: int = 1,
) -> List[Dict[str, Any]]:
    """
    Compare methods on transformed versions of ``base``.

    Fixed timetables (searched or manual) are settled on the base demand
    and then frozen; controllers roll out afresh on each transformed demand.
    """
    if not settings:
        raise ConfigError("scenario needs at least one setting")
    window = tuple(window or config.scenario.window)

    prepared = []
    for spec in methods:
        if spec.kind == "dqn":
            network, meta = load_checkpoint(spec.path)
            prepared.append((spec.label, None, network, meta))
        elif spec.kind == "manual":
            prepared.append((spec.label, load_timetable(spec.path), None, None))
        else:
            params = config.ga.model_copy(update={"seed": cell_seed(seed, spec.kind)})
            result = SEARCHES[spec.kind](base, line, tt, params, config.fitness)
            logger.info(f"Froze {spec.kind} timetable on base demand: ND {result.metrics.nd}")
            prepared.append((spec.label, result.timetable, None, None))

    cells = [
        ScenarioCell(
            method=label, transform=transform, setting=float(setting), line=line, tt=tt, base=base,
            window=window, seed=seed, timetable=timetable, network=network, meta=meta,
        )
        for label, timetable, network, meta in prepared
        for setting in settings
    ]
    return run_cells(_scenario_cell, cells, jobs)


# Sweeps

@dataclass(frozen=True)
class TrainCell:
    line: LineConfig
    tt: TravelTimeTable
    demand: DemandSet
    agent: AgentConfig
    reward: RewardParams
    variant: str
    tail: int


def _train_cell(cell: TrainCell) -> Dict[str, Any]:
    factory = default_env_factory(cell.reward, scheme_builder(cell.variant))
    result = train(factory, cell.line, cell.tt, cell.demand, cell.agent)
    tail = result.recent(cell.tail)
    return {
        "metrics": result.metrics.model_dump(),
        "episodes": result.episodes_run,
        "tail_nd": [row["nd"] for row in tail],
        "tail_reward": [row["mean_reward"] for row in tail],
        "curve": result.curve,
    }


def _mode(values: Sequence[float]) -> float:
    return float(stats.mode(np.asarray(values, dtype=np.float64), keepdims=False).mode)


def run_sweep(
    param: str,
    values: Sequence[float],
    repeats: int,
    line: LineConfig,
    tt: TravelTimeTable,
    demand: DemandSet,
    config: ExperimentConfig,
    seed: int,
    jobs: int = 1,
    tail: int = 25,
) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]], Dict[str, Any]]:
    """
    Train once per (value, repeat) with ``param`` overridden.

    Returns:
        Summary rows (per value), run rows (per cell) and a JSON summary
        with rank correlations against the swept value
    """
    if param not in ("omega", "gamma"):
        raise ConfigError(f"cannot sweep {param!r}; use omega or gamma")
    if not values:
        raise ConfigError("sweep needs at least one value")
    if repeats < 1:
        raise ConfigError("repeats must be at least 1")

    cells = []
    for i, value in enumerate(values):
        for r in range(repeats):
            agent_seed = cell_seed(seed, "repeat", r)
            agent = config.agent.model_copy(update={"seed": agent_seed})
            reward = config.reward
            if param == "omega":
                reward = RewardParams(**{**reward.model_dump(), "omega": float(value)})
            else:
                agent = AgentConfig(**{**agent.model_dump(), "gamma": float(value)})
            cells.append(TrainCell(line, tt, demand, agent, reward, "full", tail))

    outcomes = run_cells(_train_cell, cells, jobs)

    run_rows = []
    for i, value in enumerate(values):
        for r in range(repeats):
            out = outcomes[i * repeats + r]
            m = out["metrics"]
            run_rows.append({
                "param": param,
                "value": float(value),
                "repeat": r + 1,
                "seed": cells[i * repeats + r].agent.seed,
                "nd": m["nd"],
                "awt": m["awt"],
                "nsp": m["nsp"],
                "episodes": out["episodes"],
                "nd_std": float(np.std(out["tail_nd"])) if out["tail_nd"] else 0.0,
            })

    rows = []
    for i, value in enumerate(values):
        group = run_rows[i * repeats:(i + 1) * repeats]
        nd = [g["nd"] for g in group]
        awt = [g["awt"] for g in group]
        if param == "omega":
            rows.append({
                "omega": float(value),
                "repeats": repeats,
                "nd_max": max(nd),
                "nd_min": min(nd),
                "nd_mode": _mode(nd),
                "awt_max": max(awt),
                "awt_min": min(awt),
                "awt_mean": float(np.mean(awt)),
            })
        else:
            spread = [g["nd_std"] for g in group]
            rows.append({
                "gamma": float(value),
                "repeats": repeats,
                "nd_std_mean": float(np.mean(spread)),
                "nd_std_min": float(min(spread)),
                "nd_std_max": float(max(spread)),
            })

    summary: Dict[str, Any] = {"param": param, "values": [float(v) for v in values], "repeats": repeats}
    if len(set(values)) > 1:
        xs = [g["value"] for g in run_rows]
        summary["spearman_nd"] = _spearman(xs, [g["nd"] for g in run_rows])
        summary["spearman_awt"] = _spearman(xs, [g["awt"] for g in run_rows])
    return rows, run_rows, summary


def _spearman(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    if len(set(y)) < 2:
        return None
    rho = stats.spearmanr(x, y).statistic
    return None if np.isnan(rho) else float(rho)


# Ablation

def run_ablation(
    variant: str,
    line: LineConfig,
    tt: TravelTimeTable,
    demand: DemandSet,
    config: ExperimentConfig,
    seed: int,
) -> Tuple[TrainingResult, Dict[str, Any]]:
    """
    Train with a variant state/reward and summarise its last
    ``config.evaluation_episodes`` training episodes.
    """
    builder = scheme_builder(variant)
    agent = config.agent.model_copy(update={"seed": seed})
    factory = default_env_factory(config.reward, builder)
    result = train(factory, line, tt, demand, agent)
    tail = result.recent(config.evaluation_episodes)
    if not tail:
        raise ConfigError("ablation needs at least one training episode")
    row = necessity_stats(variant, [r["nd"] for r in tail], [r["mean_reward"] for r in tail])
    return result, row
