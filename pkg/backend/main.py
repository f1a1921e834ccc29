import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

load_dotenv()

import config
from commands import dicke, fidelity, rmt, spacing
from exceptions import OpfidError

# Configure logging
logging.basicConfig(level=config.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opfid",
        description="Operator fidelity metric of the Dicke model and random-matrix ensembles",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Include commands
    dicke.register(subparsers)
    spacing.register(subparsers)
    rmt.register(subparsers)
    fidelity.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # usage errors exit 2, --help and --version exit 0
        return e.code if isinstance(e.code, int) else 2

    try:
        return args.handler(args)
    except (OpfidError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
