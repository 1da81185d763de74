from dataclasses import dataclass
from struct import Struct

from veriframe.errors import ParseError

__all__ = ("Frame", "HEADER_SIZE", "MAGIC", "StreamHeader")


MAGIC = b"SFV1"
"""Magic bytes at the start of every SFV1 container."""

_HEADER_STRUCT = Struct("<4s16sIIBHHQ")

HEADER_SIZE = _HEADER_STRUCT.size
"""Size of the encoded SFV1 stream header in bytes (41)."""


@dataclass(frozen=True)
class StreamHeader:
    """Header of a raw-pixel video stream."""

    stream_id: bytes
    """16-byte opaque identifier of the stream."""

    width: int
    """Width of each frame in pixels."""

    height: int
    """Height of each frame in pixels."""

    channels: int = 1
    """Number of interleaved channels per pixel; 1 for grayscale, 3 for RGB."""

    fps_numerator: int = 30
    """Numerator of the frame rate."""

    fps_denominator: int = 1
    """Denominator of the frame rate."""

    frame_count: int = 0
    """Total number of frames in the stream."""

    @classmethod
    def decode(cls, data: bytes, *, validate: bool = True) -> "StreamHeader":
        """Decodes a stream header from the first 41 bytes of `data`.

        Raises:
            ParseError: if the data is too short, has a bad magic or violates
                the header invariants
        """
        if len(data) < HEADER_SIZE:
            raise ParseError(
                f"truncated stream header: need {HEADER_SIZE} bytes, got {len(data)}",
                len(data),
            )

        magic, stream_id, width, height, channels, fps_num, fps_den, frame_count = (
            _HEADER_STRUCT.unpack_from(data, 0)
        )
        if magic != MAGIC:
            raise ParseError(f"bad magic {magic!r}", 0)

        header = cls(
            stream_id=stream_id,
            width=width,
            height=height,
            channels=channels,
            fps_numerator=fps_num,
            fps_denominator=fps_den,
            frame_count=frame_count,
        )
        if validate:
            header.validate()
        return header

    def encode(self) -> bytes:
        """Returns the 41-byte little-endian encoding of the header."""
        return _HEADER_STRUCT.pack(
            MAGIC,
            self.stream_id,
            self.width,
            self.height,
            self.channels,
            self.fps_numerator,
            self.fps_denominator,
            self.frame_count,
        )

    @property
    def duration(self) -> float:
        """Playback duration of the stream in seconds."""
        return self.frame_count * self.fps_denominator / self.fps_numerator

    @property
    def frame_size(self) -> int:
        """Number of pixel bytes in a single frame."""
        return self.width * self.height * self.channels

    @property
    def pixel_count(self) -> int:
        """Number of pixels in a single frame."""
        return self.width * self.height

    @property
    def resolution(self) -> str:
        return f"{self.width}x{self.height}"

    @property
    def total_size(self) -> int:
        """Size of the whole SFV1 container in bytes."""
        return HEADER_SIZE + self.frame_count * self.frame_size

    def validate(self) -> None:
        """Checks the header invariants.

        Raises:
            ParseError: naming the offset of the first offending field
        """
        if len(self.stream_id) != 16:
            raise ParseError("stream id must be 16 bytes", 4)
        if self.width < 1:
            raise ParseError("width must be at least 1", 20)
        if self.height < 1:
            raise ParseError("height must be at least 1", 24)
        if self.channels not in (1, 3):
            raise ParseError(f"unsupported channel count: {self.channels}", 28)
        if self.fps_numerator < 1:
            raise ParseError("frame rate numerator must be at least 1", 29)
        if self.fps_denominator < 1:
            raise ParseError("frame rate denominator must be at least 1", 31)
        if self.frame_count < 0:
            raise ParseError("frame count must not be negative", 33)


@dataclass(frozen=True)
class Frame:
    """A single indexed frame of a stream.

    The pixel payload is row-major and channel-interleaved; it is the
    canonical byte form that gets digested.
    """

    index: int
    """Zero-based frame number."""

    pixels: bytes
    """Raw pixel bytes of the frame."""

    def check_against(self, header: StreamHeader) -> None:
        """Checks that the frame fits the given stream header.

        Raises:
            ValueError: if the pixel payload has the wrong size or the index
                is out of range
        """
        if len(self.pixels) != header.frame_size:
            raise ValueError(
                f"frame {self.index} has {len(self.pixels)} bytes, "
                f"expected {header.frame_size}"
            )
        if not 0 <= self.index < header.frame_count:
            raise ValueError(
                f"frame index {self.index} out of range for a stream of "
                f"{header.frame_count} frames"
            )
