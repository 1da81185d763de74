from .digests import DigestAlgorithm, DigestRecord, WriteMode, WriteModeKind
from .policy import PolicyKind, SelectionPolicy
from .stream import Frame, StreamHeader

__all__ = (
    "DigestAlgorithm",
    "DigestRecord",
    "Frame",
    "PolicyKind",
    "SelectionPolicy",
    "StreamHeader",
    "WriteMode",
    "WriteModeKind",
)
