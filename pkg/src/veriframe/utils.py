from collections import Counter
from pathlib import Path
from typing import Any, Dict, Tuple, Union

from veriframe.errors import ConfigurationError, ParseError

__all__ = (
    "DummyLogger",
    "ceil_div",
    "load_yaml_file",
    "parse_address",
    "parse_stream_id",
)


def _nop(*args, **kwds) -> None:
    pass


class DummyLogger:
    """Logger stand-in used by components until `use_logger()` is called."""

    def __getattr__(self, name: str):
        return _nop


def ceil_div(a: int, b: int) -> int:
    """Integer division of non-negative `a` by positive `b`, rounded up."""
    return -(-a // b)


def load_yaml_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Parses a YAML configuration file, rejecting top-level duplicate keys
    that `safe_load` would otherwise silently collapse.
    """
    from yaml import YAMLError, safe_load

    with open(path) as fp:
        keys = Counter(
            line.strip().split(":", 1)[0]
            for line in fp
            if line and line[0].isalpha() and ":" in line
        )
    duplicates = sorted(k for k, v in keys.items() if v > 1)
    if duplicates:
        raise ConfigurationError(
            f"duplicate keys found in {path}: {', '.join(duplicates)}"
        )

    with open(path) as fp:
        try:
            result = safe_load(fp)
        except YAMLError as ex:
            raise ParseError(f"invalid YAML in {path}: {ex}") from None

    if result is None:
        return {}
    if not isinstance(result, dict):
        raise ConfigurationError(f"{path} must contain a mapping at the top level")
    return result


def parse_address(value: str) -> Tuple[str, int]:
    """Parses a ``host:port`` string. An empty host means all interfaces."""
    host, sep, port = value.rpartition(":")
    if not sep:
        raise ValueError(f"expected host:port, got {value!r}")
    try:
        port_no = int(port)
    except ValueError:
        raise ValueError(f"invalid port in {value!r}") from None
    if not 0 <= port_no <= 0xFFFF:
        raise ValueError(f"port out of range in {value!r}")
    return host.strip("[]") or "0.0.0.0", port_no


def parse_stream_id(value: str) -> bytes:
    """Parses a stream identifier given as 32 hexadecimal digits."""
    try:
        result = bytes.fromhex(value)
    except ValueError:
        raise ValueError(f"stream id must be hexadecimal: {value!r}") from None
    if len(result) != 16:
        raise ValueError(f"stream id must be 16 bytes, got {len(result)}")
    return result
