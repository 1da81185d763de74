import logging
import sys

from argparse import ArgumentParser
from typing import Optional, Sequence

from .commands import get_command_factory, get_command_names
from .errors import UsageError, VeriframeError
from .version import __version__


def create_argument_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="veriframe",
        description="Tamper-evident capture and verification of video streams",
    )

    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )

    parser.add_argument(
        "--seed",
        type=int,
        default=0,
        metavar="SEED",
        help="seed of every random decision (default: %(default)s)",
    )

    parser.add_argument(
        "--log-level",
        choices=("debug", "info", "warning", "error"),
        default="info",
        help="minimum severity of logged messages (default: %(default)s)",
    )

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for name in get_command_names():
        command = get_command_factory(name)()
        subparser = subparsers.add_parser(name, help=command.help)
        command.add_arguments(subparser)
        subparser.set_defaults(handler=command)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_argument_parser()
    options = parser.parse_args(argv)

    logging.basicConfig(
        format="%(levelname)-10s| %(message)s",
        level=getattr(logging, options.log_level.upper()),
        stream=sys.stderr,
    )

    # Construct a log that the commands can write their messages to
    log = logging.getLogger()

    command = options.handler
    command.use_logger(log)
    try:
        return command.run(options)
    except UsageError as ex:
        parser.error(ex.msg)
    except VeriframeError as ex:
        log.error(ex.msg)
        return 1
    except OSError as ex:
        log.error(str(ex))
        return 1


if __name__ == "__main__":
    sys.exit(main())
