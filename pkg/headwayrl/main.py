"""
Command-line entry point.

    python -m headwayrl.main [--config PATH] [--seed N] [--out DIR] [--jobs N] [--plots] COMMAND ...

Exit codes: 0 when every requested artifact was written, 2 for input,
config and artifact errors, 1 for anything unexpected.
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from headwayrl import __version__
from headwayrl.commands import register_all
from headwayrl.commands.common import build_context
from headwayrl.core.config import settings
from headwayrl.core.exceptions import HeadwayError
from headwayrl.core.logging import setup_logging

logger = logging.getLogger("headwayrl")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headwayrl",
        description="Bus timetable generation with a rule-constrained DQN controller, plus GA/memetic baselines.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="Experiment config YAML (agent, reward, GA, fitness, scenario defaults)")
    parser.add_argument("--seed", type=int, help=f"Run seed (default {settings.DEFAULT_SEED})")
    parser.add_argument("--out", default="out", help="Output directory (default ./out)")
    parser.add_argument("--jobs", type=int, help=f"Worker processes for sweep/scenario cells (default {settings.JOBS})")
    parser.add_argument("--plots", action="store_true", help="Also render PNG plots (needs matplotlib)")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    register_all(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    setup_logging(settings.LOG, settings.LOG_FILE)
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        ctx = build_context(args, argv)
        return args.handler(args, ctx)
    except (HeadwayError, ValidationError) as e:
        logger.error(str(e))
        print(f"headwayrl {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception:
        logger.exception(f"Unexpected failure in {args.command}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
