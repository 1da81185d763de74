"""Helpers shared by the model objects that can be spelled on the command
line or in configuration files.
"""

from typing import Optional, Tuple

from veriframe.errors import InvalidPolicyError

__all__ = ("parse_parametrized_spec",)


def parse_parametrized_spec(value: str, *, what: str) -> Tuple[str, Optional[int]]:
    """Splits a specification like ``nth:30`` into a lowercase name and an
    optional positive integer parameter.

    Parameters:
        value: the string to parse
        what: human-readable name of the kind of object being parsed, used in
            error messages

    Returns:
        the name and the parameter, or ``None`` if no parameter was given

    Raises:
        InvalidPolicyError: if the parameter is not a positive integer
    """
    name, sep, param = value.strip().partition(":")
    name = name.strip().lower()
    if not name:
        raise InvalidPolicyError(f"empty {what} specification")
    if not sep:
        return name, None

    try:
        number = int(param)
    except ValueError:
        raise InvalidPolicyError(
            f"{what} parameter must be an integer, got {param!r}"
        ) from None
    if number < 1:
        raise InvalidPolicyError(f"{what} parameter must be at least 1, got {number}")
    return name, number
