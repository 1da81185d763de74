"""Benchmark configuration and the ``bench.yaml`` file.

Configuration schema (every key is optional)::

    resolutions:
      - {name: v1, width: 256, height: 134}
      - ...
    frames: 303
    repetitions: 20
    e2e_repetitions: 1
    algorithms: [md5, sha256]
    modes: [perframe, "batchbytes:30", "batchdigests:30"]
    policies: [all, "nth:30", "nth:15"]
    seed: 0
    channels: 1
"""

from copy import deepcopy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from deepmerge import Merger

from veriframe.errors import ConfigurationError, InvalidPolicyError, ParseError
from veriframe.model import DigestAlgorithm, SelectionPolicy, StreamHeader, WriteMode
from veriframe.utils import load_yaml_file

__all__ = ("BenchConfig", "MIN_REPETITIONS", "PRESETS", "Resolution")


MIN_REPETITIONS = 3


@dataclass(frozen=True)
class Resolution:
    """A named frame size."""

    name: str
    width: int
    height: int

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def __str__(self) -> str:
        return f"{self.width}x{self.height}"


PRESETS: Tuple[Resolution, ...] = (
    Resolution("v1", 256, 134),
    Resolution("v2", 426, 224),
    Resolution("v3", 640, 338),
    Resolution("v4", 854, 450),
    Resolution("v5", 1280, 674),
    Resolution("v6", 1920, 1012),
)
"""The six resolutions a default run sweeps, smallest first."""


_DEFAULTS: Dict[str, Any] = {
    "resolutions": [
        {"name": r.name, "width": r.width, "height": r.height} for r in PRESETS
    ],
    "frames": 303,
    "repetitions": 20,
    "e2e_repetitions": 1,
    "algorithms": ["md5", "sha256"],
    "modes": ["perframe", "batchbytes:30", "batchdigests:30"],
    "policies": ["all", "nth:30", "nth:15"],
    "seed": 0,
    "channels": 1,
}

# Lists given by the user replace the defaults instead of extending them.
_merger = Merger([(dict, ["merge"]), (list, ["override"])], ["override"], ["override"])


@dataclass
class BenchConfig:
    """Parameters of a benchmark run. Every combination of resolution,
    algorithm, mode and policy is one cell of the result.
    """

    resolutions: List[Resolution] = field(default_factory=lambda: list(PRESETS))
    frames: int = 303
    """Number of frames in each synthetic stream."""

    repetitions: int = 20
    """Number of timed repetitions per cell for serialize and hash times."""

    e2e_repetitions: int = 1
    """Number of full capture-ingest-commit runs per cell; 0 disables them."""

    algorithms: List[DigestAlgorithm] = field(
        default_factory=lambda: [DigestAlgorithm.MD5, DigestAlgorithm.SHA256]
    )
    modes: List[WriteMode] = field(
        default_factory=lambda: [
            WriteMode.per_frame(),
            WriteMode.batch_bytes(30),
            WriteMode.batch_digests(30),
        ]
    )
    policies: List[SelectionPolicy] = field(
        default_factory=lambda: [
            SelectionPolicy.all(),
            SelectionPolicy.every_nth(30),
            SelectionPolicy.every_nth(15),
        ]
    )
    seed: int = 0
    channels: int = 1

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "BenchConfig":
        """Constructs a configuration from its parsed YAML form; keys that are
        missing fall back to the defaults.
        """
        unknown = sorted(set(obj) - set(_DEFAULTS))
        if unknown:
            raise ConfigurationError(
                f"unknown bench configuration keys: {', '.join(unknown)}"
            )

        obj = _merger.merge(deepcopy(_DEFAULTS), obj)
        try:
            resolutions = [
                Resolution(
                    name=str(item.get("name") or f"{item['width']}x{item['height']}"),
                    width=int(item["width"]),
                    height=int(item["height"]),
                )
                for item in obj["resolutions"]
            ]
            result = cls(
                resolutions=resolutions,
                frames=int(obj["frames"]),
                repetitions=int(obj["repetitions"]),
                e2e_repetitions=int(obj["e2e_repetitions"]),
                algorithms=[DigestAlgorithm.from_string(str(v)) for v in obj["algorithms"]],
                modes=[WriteMode.from_string(str(v)) for v in obj["modes"]],
                policies=[SelectionPolicy.from_string(str(v)) for v in obj["policies"]],
                seed=int(obj["seed"]),
                channels=int(obj["channels"]),
            )
        except InvalidPolicyError as ex:
            raise ConfigurationError(f"invalid bench configuration: {ex.msg}") from None
        except (KeyError, TypeError, ValueError, AttributeError) as ex:
            raise ConfigurationError(f"invalid bench configuration: {ex}") from None

        result.validate()
        return result

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BenchConfig":
        """Loads a benchmark configuration from a YAML file."""
        return cls.from_dict(load_yaml_file(path))

    def header_for(self, resolution: Resolution, stream_id: bytes) -> StreamHeader:
        return StreamHeader(
            stream_id,
            resolution.width,
            resolution.height,
            channels=self.channels,
            frame_count=self.frames,
        )

    def validate(self) -> None:
        """Checks the configuration.

        Raises:
            ConfigurationError: if the configuration is not usable
        """
        if self.repetitions < MIN_REPETITIONS:
            raise ConfigurationError(
                f"at least {MIN_REPETITIONS} repetitions are needed for a "
                f"meaningful median, got {self.repetitions}"
            )
        if self.e2e_repetitions < 0:
            raise ConfigurationError("e2e_repetitions must not be negative")
        if self.frames < 1:
            raise ConfigurationError("a benchmark stream needs at least one frame")
        if not self.resolutions:
            raise ConfigurationError("no resolutions to benchmark")
        for what in ("algorithms", "modes", "policies"):
            if not getattr(self, what):
                raise ConfigurationError(f"no {what} to benchmark")

        names = [r.name for r in self.resolutions]
        if len(set(names)) != len(names):
            raise ConfigurationError("resolution names must be unique")

        for resolution in self.resolutions:
            try:
                self.header_for(resolution, bytes(16)).validate()
            except ParseError as ex:
                raise ConfigurationError(
                    f"resolution {resolution.name} is not valid: {ex.msg}"
                ) from None
