from dataclasses import dataclass
from enum import Enum

from veriframe.errors import InvalidPolicyError

from .base import parse_parametrized_spec

__all__ = ("DEFAULT_GOP", "PolicyKind", "SelectionPolicy")


DEFAULT_GOP = 30
"""Default keyframe period used when ``gop`` is given without a parameter."""


class PolicyKind(Enum):
    """Enum representing the frame selection strategies."""

    ALL = "all"
    EVERY_NTH = "nth"
    KEYFRAME_ONLY = "gop"


@dataclass(frozen=True)
class SelectionPolicy:
    """Policy deciding which frames of a stream get digested.

    ``KEYFRAME_ONLY`` models keyframe-only hashing with a fixed GOP period
    since no codec is parsed; it selects exactly the same indices as
    ``EVERY_NTH`` with the same period.
    """

    kind: PolicyKind = PolicyKind.ALL
    """The selection strategy."""

    period: int = 1
    """Distance between two selected frames; always 1 for `ALL`."""

    def __post_init__(self):
        if self.period < 1:
            raise InvalidPolicyError(
                f"selection period must be at least 1, got {self.period}"
            )
        if self.kind is PolicyKind.ALL and self.period != 1:
            raise InvalidPolicyError("the 'all' policy has no period")

    @classmethod
    def all(cls) -> "SelectionPolicy":
        return cls(PolicyKind.ALL, 1)

    @classmethod
    def every_nth(cls, n: int) -> "SelectionPolicy":
        return cls(PolicyKind.EVERY_NTH, n)

    @classmethod
    def keyframe_only(cls, gop: int = DEFAULT_GOP) -> "SelectionPolicy":
        return cls(PolicyKind.KEYFRAME_ONLY, gop)

    @classmethod
    def from_string(cls, value: str) -> "SelectionPolicy":
        """Constructs a policy from its command line spelling:
        ``all``, ``nth:<n>`` or ``gop:<g>``.
        """
        name, param = parse_parametrized_spec(value, what="policy")
        try:
            kind = PolicyKind(name)
        except ValueError:
            raise InvalidPolicyError(f"unknown selection policy: {value!r}") from None

        if kind is PolicyKind.ALL:
            if param is not None:
                raise InvalidPolicyError("the 'all' policy has no parameter")
            return cls.all()
        elif kind is PolicyKind.EVERY_NTH:
            if param is None:
                raise InvalidPolicyError("the 'nth' policy needs a parameter")
            return cls.every_nth(param)
        else:
            return cls.keyframe_only(param or DEFAULT_GOP)

    def __str__(self) -> str:
        if self.kind is PolicyKind.ALL:
            return "all"
        return f"{self.kind.value}:{self.period}"

    def selects(self, index: int) -> bool:
        """Returns whether the frame with the given index is selected."""
        return index % self.period == 0
