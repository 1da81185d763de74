from .base import Command, CommandBase
from .registry import get_command_factory, get_command_names, is_valid_command

__all__ = (
    "Command",
    "CommandBase",
    "get_command_factory",
    "get_command_names",
    "is_valid_command",
)
