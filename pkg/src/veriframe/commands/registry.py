"""Registry object that maps subcommand names to the corresponding command
implementations.
"""

from typing import Callable, Dict, List

from .base import Command

__all__ = ("get_command_factory", "get_command_names", "is_valid_command")


#: Dictionary mapping subcommand names to command factories
_registry: Dict[str, Callable[[], Command]] = {}

#: Flag storing whether the registry has already been initialized with the
#: commands
_registry_initialized: bool = False


def _ensure_registry() -> None:
    global _registry_initialized

    if not _registry_initialized:
        _register_commands()
        _registry_initialized = True


def get_command_factory(name: str) -> Callable[[], Command]:
    """Returns the class or factory function that implements the subcommand
    with the given name.
    """
    _ensure_registry()
    return _registry[name]


def get_command_names() -> List[str]:
    """Returns the names of all subcommands in the order they should be
    listed in the help text.
    """
    _ensure_registry()
    return list(_registry)


def is_valid_command(name: str) -> bool:
    """Returns whether there is a subcommand with the given name."""
    try:
        get_command_factory(name)
        return True
    except KeyError:
        return False


def _register_commands() -> None:
    """Register all subcommands of the tool into the registry."""
    from .bench import BenchCommand
    from .demo import DemoCommand
    from .ledger import BootstrapCommand, LedgerCommand, LedgerQueryCommand
    from .stream import CaptureCommand, GenerateCommand, IngestCommand
    from .verification import TamperCommand, VerifyCommand

    updates = {
        "bootstrap": BootstrapCommand,
        "generate": GenerateCommand,
        "capture": CaptureCommand,
        "ingest": IngestCommand,
        "ledger": LedgerCommand,
        "ledger-query": LedgerQueryCommand,
        "verify": VerifyCommand,
        "tamper": TamperCommand,
        "bench": BenchCommand,
        "demo": DemoCommand,
    }

    _registry.update(updates)
