import argparse
import logging

from headwayrl.commands.common import RunContext, add_line_demand, resolve_demand, resolve_line
from headwayrl.core.exceptions import ConfigError
from headwayrl.services.experiments import SCENARIO_COLUMNS, MethodSpec, run_scenario

logger = logging.getLogger(__name__)

SCENARIO_FILE = "scenario.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser("scenario", help="Compare methods under shifted or resampled demand")
    add_line_demand(parser)
    parser.add_argument("--transform", required=True, choices=["shift", "sample"])
    parser.add_argument("--window", type=int, nargs=2, metavar=("START", "END"), help="Window whose arrivals are shifted")
    parser.add_argument("--shifts", type=int, nargs="+", help="Shifts in minutes (negative = earlier)")
    parser.add_argument("--rates", type=float, nargs="+", help="Sampling rates")
    parser.add_argument(
        "--methods",
        nargs="+",
        required=True,
        help="dqn:CHECKPOINT, ga, memetic, manual:TIMETABLE_CSV",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx: RunContext) -> int:
    line, tt = resolve_line(ctx, args.line)
    base = resolve_demand(ctx, args.demand, line)
    methods = [MethodSpec.parse(text) for text in args.methods]
    for spec in methods:
        ctx.use_input(spec.path)

    if args.transform == "shift":
        settings = list(args.shifts or ctx.config.scenario.shifts)
        identity = 0.0
    else:
        settings = list(args.rates or ctx.config.scenario.rates)
        identity = 1.0
    if any(s <= 0 for s in settings) and args.transform == "sample":
        raise ConfigError("sampling rates must be positive")
    # the untransformed demand is always reported first as the reference row
    settings = [identity] + [float(s) for s in settings if float(s) != identity]

    rows = run_scenario(
        line, tt, base, args.transform, settings, methods, ctx.config, ctx.seed,
        window=tuple(args.window) if args.window else None, jobs=ctx.jobs,
    )
    with ctx.writer() as writer:
        writer.rows(SCENARIO_FILE, rows, SCENARIO_COLUMNS)
        ctx.finish(writer, {"transform": args.transform, "settings": settings, "methods": args.methods})
    return 0
