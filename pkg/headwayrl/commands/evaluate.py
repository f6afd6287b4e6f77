import argparse
import logging

from headwayrl.commands.common import RunContext, add_line_demand, maybe_plot, resolve_demand, resolve_line
from headwayrl.core.exceptions import TimetableError
from headwayrl.services.reporting import plot_capacity_series, plot_intervals
from headwayrl.services.simulator import evaluation_report, load_timetable, series_frame, validate_timetable

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.json"
SERIES_FILE = "capacity_series.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Evaluate a timetable against a demand set")
    parser.add_argument("--timetable", required=True, help="Timetable CSV (header depart_minute)")
    add_line_demand(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx: RunContext) -> int:
    line, tt = resolve_line(ctx, args.line)
    demand = resolve_demand(ctx, args.demand, line)
    timetable = load_timetable(ctx.use_input(args.timetable))
    try:
        validate_timetable(timetable, line)
    except TimetableError as e:
        # operator timetables are evaluated as given
        logger.warning(f"Timetable does not follow the line's interval rules: {e}")

    report, _ = evaluation_report(demand, line, tt, timetable)
    with ctx.writer() as writer:
        writer.json(METRICS_FILE, report)
        writer.frame(SERIES_FILE, series_frame(report.capacity_series))
        maybe_plot(ctx, writer, plot_capacity_series, writer.path(SERIES_FILE), writer.path("capacity_series.png"))
        maybe_plot(ctx, writer, plot_intervals, writer.path(SERIES_FILE), writer.path("intervals.png"))
        ctx.finish(writer)
    logger.info(f"ND {report.nd}, AWT {report.awt:.2f}, NSP {report.nsp}, unserved {report.unserved}")
    return 0
