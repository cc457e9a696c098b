"""Command-line front end for corrlab"""

import argparse
import sys
from typing import List, Optional

from .commands.run import run_command
from .commands.schema import schema_command
from .commands.suite import suite_command
from .config import settings
from .models.schemas import PAYLOADS
from .utils.errors import CorrlabError
from .utils.logging import logger


def tolerance_value(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"tolerance must lie in (0, 1), got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrlab",
        description="Checks for finite-dimensional correspondences, commutants and product systems",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("file")
    run.add_argument("--tol", type=tolerance_value, default=None, help="absolute tolerance override")
    run.add_argument("--seed", type=int, default=None, help="seed override")
    run.add_argument("--report", choices=["json", "text"], default="json")
    run.add_argument("--out", default=None, help="write the report here instead of stdout")
    run.set_defaults(handler=run_command)

    suite = sub.add_parser("suite", help="run every *.json scenario in a directory")
    suite.add_argument("directory", nargs="?", default=settings.CORPUS_DIR)
    suite.add_argument("--jobs", type=int, default=None, help=f"worker processes (default {settings.SUITE_JOBS})")
    suite.add_argument("--report", choices=["json", "text"], default="json")
    suite.set_defaults(handler=suite_command)

    schema = sub.add_parser("schema", help="print the JSON schema of a scenario kind")
    schema.add_argument("kind", choices=sorted(PAYLOADS) + ["scenario"])
    schema.set_defaults(handler=schema_command)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.handler(args)
    except CorrlabError as e:
        logger.log_error("command_failed", {"command": args.command, "error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
