import argparse

from headwayrl.commands.common import RunContext
from headwayrl.core.config import load_yaml_config
from headwayrl.schemas.demand import SyntheticDemandSpec
from headwayrl.services.od_data import demand_frame, generate_synthetic

DEMAND_FILE = "demand.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen-data", help="Generate synthetic OD demand from a spec file")
    parser.add_argument("--spec", required=True, help="Synthetic demand spec YAML")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx: RunContext) -> int:
    spec = load_yaml_config(ctx.use_input(args.spec), SyntheticDemandSpec)
    demand = generate_synthetic(spec, ctx.seed)
    with ctx.writer() as writer:
        writer.frame(DEMAND_FILE, demand_frame(demand))
        ctx.finish(writer, {"spec": spec.model_dump(mode="json")})
    return 0
