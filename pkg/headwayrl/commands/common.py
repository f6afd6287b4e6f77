"""
Helpers shared by the subcommands: resolving inputs from flags or the
experiment config, and the run context every command writes through.
"""

import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from headwayrl.core.config import load_yaml_config, settings
from headwayrl.core.exceptions import ConfigError
from headwayrl.schemas.demand import DemandSet
from headwayrl.schemas.experiment import ExperimentConfig
from headwayrl.schemas.line import LineConfig
from headwayrl.services.line_model import TravelTimeTable, load_line_config
from headwayrl.services.od_data import load_demand
from headwayrl.services.reporting import ArtifactWriter

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """Everything a command needs besides its own flags."""
    command: str
    argv: List[str]
    config: ExperimentConfig
    seed: int
    out_dir: Path
    jobs: int
    plots: bool
    inputs: List[str] = field(default_factory=list)

    def writer(self) -> ArtifactWriter:
        return ArtifactWriter(self.out_dir)

    def use_input(self, path: Optional[str]) -> Optional[str]:
        if path is not None and path not in self.inputs:
            self.inputs.append(path)
        return path

    def manifest_config(self, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        data = self.config.model_dump(mode="json")
        if extra:
            data["command_options"] = extra
        return data

    def finish(self, writer: ArtifactWriter, extra: Optional[Dict[str, Any]] = None) -> None:
        writer.manifest(self.command, self.argv, self.manifest_config(extra), self.seed, self.inputs)
        logger.info(f"{self.command}: wrote {len(writer.written)} files to {self.out_dir}")


def build_context(args: argparse.Namespace, argv: Sequence[str]) -> RunContext:
    config = load_yaml_config(args.config, ExperimentConfig) if args.config else ExperimentConfig()
    seed = args.seed if args.seed is not None else settings.DEFAULT_SEED
    if seed < 0:
        raise ConfigError("--seed must be non-negative")
    jobs = args.jobs if args.jobs is not None else settings.JOBS
    recorded = list(argv)
    if args.seed is None:
        # the recorded argv always carries the seed
        recorded = ["--seed", str(seed)] + recorded
    ctx = RunContext(
        command=args.command,
        argv=recorded,
        config=config,
        seed=seed,
        out_dir=Path(args.out),
        jobs=max(1, jobs),
        plots=args.plots,
    )
    ctx.use_input(args.config)
    return ctx


def resolve_line(ctx: RunContext, path: Optional[str]) -> Tuple[LineConfig, TravelTimeTable]:
    path = path or ctx.config.line_file
    if not path:
        raise ConfigError("no line config given (--line or line_file in --config)")
    return load_line_config(ctx.use_input(path))


def resolve_demand(ctx: RunContext, path: Optional[str], line: LineConfig) -> DemandSet:
    path = path or ctx.config.demand_file
    if not path:
        raise ConfigError("no demand file given (--demand or demand_file in --config)")
    return load_demand(
        ctx.use_input(path),
        stations=line.stations,
        line_id=line.line_id,
        direction=line.direction,
    )


def add_line_demand(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--line", help="Line config YAML (default: line_file from --config)")
    parser.add_argument("--demand", help="Demand CSV (default: demand_file from --config)")


def maybe_plot(ctx: RunContext, writer: ArtifactWriter, fn, *args, **kwargs) -> None:
    """Render a plot when --plots is set. A missing matplotlib or a failed render is logged, not raised."""
    if not ctx.plots:
        return
    try:
        writer.adopt(fn(*args, **kwargs))
    except ImportError as e:
        logger.warning(str(e))
    except (OSError, ValueError, RuntimeError, KeyError) as e:
        logger.warning(f"Skipped plot {getattr(fn, '__name__', fn)}: {e}")
