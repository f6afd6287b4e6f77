import argparse
import logging

from headwayrl.commands.common import RunContext, add_line_demand, maybe_plot, resolve_demand, resolve_line
from headwayrl.schemas.agent import OMEGA_PRESETS, RewardParams
from headwayrl.services.agent import CURVE_COLUMNS, default_env_factory, train
from headwayrl.services.experiments import checkpoint_meta
from headwayrl.services.network import save_checkpoint
from headwayrl.services.reporting import plot_capacity_series, plot_intervals, plot_reward_curve
from headwayrl.services.simulator import evaluation_report, series_frame, write_timetable

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "model.ckpt"
CURVE_FILE = "reward_curve.csv"
TIMETABLE_FILE = "timetable.csv"
METRICS_FILE = "metrics.json"
SERIES_FILE = "capacity_series.csv"
TRACE_FILE = "trace.jsonl"


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train the dispatch controller")
    add_line_demand(parser)
    parser.add_argument(
        "--preset",
        choices=sorted(OMEGA_PRESETS),
        help="Waiting-penalty preset: favour short waits or few departures",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx: RunContext) -> int:
    line, tt = resolve_line(ctx, args.line)
    demand = resolve_demand(ctx, args.demand, line)

    reward = ctx.config.reward
    if args.preset:
        reward = RewardParams(**{**reward.model_dump(), "omega": OMEGA_PRESETS[args.preset]})
    agent = ctx.config.agent.model_copy(update={"seed": ctx.seed})

    result = train(default_env_factory(reward), line, tt, demand, agent)
    report, _ = evaluation_report(demand, line, tt, result.timetable)

    with ctx.writer() as writer:
        meta = checkpoint_meta("full", reward, agent, result.state_size, line)
        writer.adopt(save_checkpoint(result.network, writer.path(CHECKPOINT_FILE), meta))
        writer.rows(CURVE_FILE, result.curve, CURVE_COLUMNS)
        writer.adopt(write_timetable(result.timetable, writer.path(TIMETABLE_FILE)))
        writer.json(METRICS_FILE, report)
        writer.frame(SERIES_FILE, series_frame(report.capacity_series))
        writer.jsonl(TRACE_FILE, result.trace)
        maybe_plot(ctx, writer, plot_reward_curve, writer.path(CURVE_FILE), writer.path("reward_curve.png"))
        maybe_plot(ctx, writer, plot_capacity_series, writer.path(SERIES_FILE), writer.path("capacity_series.png"))
        maybe_plot(ctx, writer, plot_intervals, writer.path(SERIES_FILE), writer.path("intervals.png"))
        ctx.finish(writer, {"preset": args.preset, "episodes_run": result.episodes_run})

    logger.info(
        f"Trained {result.episodes_run} episodes: ND {report.nd}, AWT {report.awt:.2f}, NSP {report.nsp}"
    )
    return 0
