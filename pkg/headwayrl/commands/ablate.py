import argparse
import logging

from headwayrl.commands.common import RunContext, add_line_demand, maybe_plot, resolve_demand, resolve_line
from headwayrl.services.ablation import STATS_COLUMNS, VARIANTS, scheme_builder
from headwayrl.services.agent import CURVE_COLUMNS
from headwayrl.services.experiments import run_ablation
from headwayrl.services.reporting import plot_reward_curve

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("ablate", help="Train with an alternative state/reward scheme")
    parser.add_argument("--variant", required=True, help=f"One of: {', '.join(VARIANTS)}")
    add_line_demand(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx: RunContext) -> int:
    # fail on a bad tag before loading anything
    scheme_builder(args.variant)
    line, tt = resolve_line(ctx, args.line)
    demand = resolve_demand(ctx, args.demand, line)

    result, row = run_ablation(args.variant, line, tt, demand, ctx.config, ctx.seed)
    with ctx.writer() as writer:
        writer.rows("reward_curve.csv", result.curve, CURVE_COLUMNS)
        writer.rows("necessity.csv", [row], STATS_COLUMNS)
        maybe_plot(ctx, writer, plot_reward_curve, writer.path("reward_curve.csv"), writer.path("reward_curve.png"),
                   title=f"Reward per episode ({args.variant})")
        ctx.finish(writer, {"variant": args.variant, "state_size": result.state_size})
    logger.info(f"{args.variant}: ND variance {row['nd_variance']:.3f} over the last episodes")
    return 0
