import argparse
import logging

from headwayrl.commands.common import RunContext, add_line_demand, maybe_plot, resolve_demand, resolve_line
from headwayrl.core.exceptions import ConfigError
from headwayrl.services.baselines import RUNS_COLUMNS, SEARCHES, TRACE_COLUMNS, repeated_runs
from headwayrl.services.reporting import plot_capacity_series, plot_sweep
from headwayrl.services.simulator import evaluation_report, series_frame, write_timetable

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("optimize", help="Search a fixed timetable with GA or memetic search")
    parser.add_argument("--method", required=True, choices=sorted(SEARCHES))
    add_line_demand(parser)
    parser.add_argument("--runs", type=int, default=1, help="Independent runs with derived seeds")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx: RunContext) -> int:
    if args.runs < 1:
        raise ConfigError("--runs must be at least 1")
    line, tt = resolve_line(ctx, args.line)
    demand = resolve_demand(ctx, args.demand, line)
    params = ctx.config.ga.model_copy(update={"seed": ctx.seed})

    best, rows, summary = repeated_runs(args.method, demand, line, tt, params, ctx.config.fitness, args.runs)
    report, _ = evaluation_report(demand, line, tt, best.timetable)

    with ctx.writer() as writer:
        writer.adopt(write_timetable(best.timetable, writer.path("timetable.csv")))
        writer.rows("fitness_trace.csv", best.trace, TRACE_COLUMNS)
        writer.json("metrics.json", report)
        writer.frame("capacity_series.csv", series_frame(report.capacity_series))
        if args.runs > 1:
            writer.rows("runs.csv", rows, RUNS_COLUMNS)
            writer.json("runs_summary.json", summary)
        maybe_plot(ctx, writer, plot_sweep, writer.path("fitness_trace.csv"), writer.path("fitness_trace.png"),
                   "generation", ["best", "mean"])
        maybe_plot(ctx, writer, plot_capacity_series, writer.path("capacity_series.csv"),
                   writer.path("capacity_series.png"))
        ctx.finish(writer, {"method": args.method, "runs": args.runs})

    logger.info(f"{args.method}: fitness {best.fitness:.2f}, ND {report.nd}, AWT {report.awt:.2f}, NSP {report.nsp}")
    return 0
