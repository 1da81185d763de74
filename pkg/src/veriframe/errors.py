from typing import Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from veriframe.transport.capture import CaptureSummary

__all__ = (
    "VeriframeError",
    "ParseError",
    "ProtocolError",
    "InvalidPolicyError",
    "ConfigurationError",
    "ChannelError",
    "LedgerError",
    "StaleTipError",
    "BlockRejectedError",
    "LedgerUnavailableError",
    "TamperError",
    "UsageError",
    "InvalidFrameError",
    "PipelineStageError",
)


class VeriframeError(RuntimeError):
    """Base class for all errors specific to the `veriframe` package."""

    msg: str

    def __init__(self, message: str):
        super().__init__(message)
        self.msg = message

    def __str__(self):
        return str(self.msg)


class ParseError(VeriframeError):
    """Base class for errors thrown while parsing containers, wire messages
    or configuration files.
    """

    offset: Optional[int]

    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(
            f"{message} at offset {offset}" if offset is not None else message
        )
        self.offset = offset


class ProtocolError(VeriframeError):
    """Error thrown when a peer violates the reliable-channel or the consensus
    message protocol.
    """

    pass


class InvalidPolicyError(VeriframeError):
    """Error thrown for an invalid frame selection policy, write mode or
    digest algorithm.
    """

    pass


class ConfigurationError(VeriframeError):
    """Error thrown when a cluster or bench configuration is invalid."""

    pass


class ChannelError(VeriframeError):
    """Error thrown when the reliable digest channel fails during capture.

    The capture agent aborts the run and attaches what it managed to send
    before the failure.
    """

    summary: Optional["CaptureSummary"]
    #: Partial summary of the capture run that was aborted

    def __init__(self, message: str, *, summary: Optional["CaptureSummary"] = None):
        super().__init__(message)
        self.summary = summary


class LedgerError(VeriframeError):
    """Base class for errors thrown by the ledger cluster."""

    pass


class StaleTipError(LedgerError):
    """Error thrown when a block is assembled against or appended onto a chain
    tip that is not the current one.
    """

    pass


class BlockRejectedError(LedgerError):
    """Error thrown when a block or its vote set fails verification."""

    height: Optional[int]

    def __init__(self, message: str, *, height: Optional[int] = None):
        super().__init__(
            f"block {height} rejected: {message}" if height is not None else message
        )
        self.height = height


class LedgerUnavailableError(LedgerError):
    """Error thrown when the ledger cannot be reached."""

    pass


class TamperError(VeriframeError):
    """Error thrown for an invalid tampering request."""

    pass


class UsageError(VeriframeError):
    """Error thrown when command line arguments fail validation."""

    pass


class InvalidFrameError(VeriframeError):
    """Error thrown when a frame does not fit the stream it is written to."""

    index: int
    #: Index of the offending frame

    def __init__(self, index: int, message: str):
        super().__init__(f"frame {index}: {message}")
        self.index = index


class PipelineStageError(VeriframeError):
    """Error thrown when a stage of the demonstration pipeline fails."""

    stage: str
    #: Name of the stage that failed

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage} stage failed: {message}")
        self.stage = stage
