from abc import abstractmethod, ABCMeta
from argparse import ArgumentParser, ArgumentTypeError, Namespace
from logging import Logger
from typing import Callable, Tuple, TypeVar

from veriframe.errors import VeriframeError
from veriframe.utils import DummyLogger, parse_address

__all__ = ("Command", "CommandBase", "address_arg", "spec_arg")


T = TypeVar("T")


class Command(metaclass=ABCMeta):
    """Interface specification for subcommands of the command line tool."""

    name: str
    help: str

    @abstractmethod
    def add_arguments(self, parser: ArgumentParser) -> None:
        """Registers the arguments of the subcommand on its own parser."""
        raise NotImplementedError

    @abstractmethod
    def run(self, options: Namespace) -> int:
        """Executes the subcommand with the parsed command line options.

        Arguments are validated before anything is written or sent; invalid
        arguments raise `UsageError`.

        Returns:
            the exit code of the process
        """
        raise NotImplementedError

    @abstractmethod
    def use_logger(self, log: Logger) -> None:
        """Instructs the subcommand to log its progress to the given logger."""
        raise NotImplementedError


class CommandBase(Command):
    """Base class for subcommand implementations."""

    log: Logger
    name: str
    help: str = ""

    def __init__(self):
        # BootstrapCommand -> bootstrap, LedgerQueryCommand -> ledger-query
        name = type(self).__name__
        if name.endswith("Command"):
            name = name[: -len("Command")]
        self.name = "".join(
            f"-{ch.lower()}" if ch.isupper() and index else ch.lower()
            for index, ch in enumerate(name)
        )
        self.log = DummyLogger()  # type: ignore

    def use_logger(self, log: Logger) -> None:
        self.log = log


def spec_arg(factory: Callable[[str], T], what: str) -> Callable[[str], T]:
    """Wraps a ``from_string()`` factory for use as an argparse type, so that
    invalid spellings are reported as usage errors.
    """

    def convert(value: str) -> T:
        try:
            return factory(value)
        except (VeriframeError, ValueError) as ex:
            message = getattr(ex, "msg", None) or str(ex)
            raise ArgumentTypeError(f"invalid {what}: {message}") from None

    return convert


def address_arg(value: str) -> Tuple[str, int]:
    """Argparse type for ``host:port`` arguments."""
    try:
        return parse_address(value)
    except ValueError as ex:
        raise ArgumentTypeError(str(ex)) from None
