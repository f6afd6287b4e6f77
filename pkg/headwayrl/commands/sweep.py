import argparse

from headwayrl.commands.common import RunContext, add_line_demand, maybe_plot, resolve_demand, resolve_line
from headwayrl.services.experiments import GAMMA_COLUMNS, OMEGA_COLUMNS, SWEEP_RUN_COLUMNS, run_sweep
from headwayrl.services.reporting import plot_sweep


def _value(text: str) -> float:
    """Accept plain numbers and fractions such as 1/5000."""
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="Sweep the waiting-penalty weight or the discount rate")
    parser.add_argument("--param", required=True, choices=["omega", "gamma"])
    parser.add_argument("--values", required=True, nargs="+", type=_value, help="Values, fractions allowed")
    parser.add_argument("--repeats", type=int, default=1)
    add_line_demand(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx: RunContext) -> int:
    line, tt = resolve_line(ctx, args.line)
    demand = resolve_demand(ctx, args.demand, line)
    rows, run_rows, summary = run_sweep(
        args.param, args.values, args.repeats, line, tt, demand, ctx.config, ctx.seed, jobs=ctx.jobs,
    )
    columns = OMEGA_COLUMNS if args.param == "omega" else GAMMA_COLUMNS
    with ctx.writer() as writer:
        writer.rows("sweep.csv", rows, columns)
        writer.rows("sweep_runs.csv", run_rows, SWEEP_RUN_COLUMNS)
        writer.json("sweep_summary.json", summary)
        ys = ["nd_max", "awt_mean"] if args.param == "omega" else ["nd_std_mean"]
        maybe_plot(ctx, writer, plot_sweep, writer.path("sweep.csv"), writer.path("sweep.png"), columns[0], ys)
        ctx.finish(writer, {"param": args.param, "values": args.values, "repeats": args.repeats})
    return 0
