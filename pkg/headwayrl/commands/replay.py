import argparse
import logging

from headwayrl.commands.common import RunContext
from headwayrl.core.exceptions import ArtifactError
from headwayrl.services.reporting import load_manifest, verify_inputs

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("replay", help="Re-run a command from its manifest.json")
    parser.add_argument("--manifest", required=True, help="manifest.json written by an earlier run")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx: RunContext) -> int:
    # imported here: main imports this module
    from headwayrl.main import main

    manifest = load_manifest(args.manifest)
    if manifest.command == "replay" or not manifest.argv:
        raise ArtifactError(f"{args.manifest}: manifest does not describe a replayable run")
    verify_inputs(manifest)
    argv = list(manifest.argv)
    if "--seed" not in argv:
        argv = ["--seed", str(manifest.seed)] + argv
    logger.info(f"Replaying {manifest.command}: {' '.join(argv)}")
    return main(argv)
