"""Reading and writing SFV1 containers, frame selection and deterministic
synthetic streams.

SFV1 is an uncompressed container: a 41-byte little-endian header (see
`StreamHeader`) followed by ``frame_count`` frames of raw pixels, each exactly
``width * height * channels`` bytes long, without per-frame headers.

Synthetic frames are produced with SHAKE-128: the pixels of frame *i* are the
first ``frame_size`` bytes of the SHAKE-128 output for the message
``b"veriframe-synthetic" + seed.to_bytes(8, "little") + i.to_bytes(8, "little")``.
This generator is part of the file format contract of the test fixtures and
must not change.
"""

from contextlib import contextmanager
from hashlib import shake_128
from pathlib import Path
from typing import (
    BinaryIO,
    Iterable,
    Iterator,
    List,
    Sequence,
    Tuple,
    Union,
    overload,
)

from veriframe.errors import InvalidFrameError, InvalidPolicyError, ParseError
from veriframe.model import Frame, SelectionPolicy, StreamHeader
from veriframe.model.stream import HEADER_SIZE

__all__ = (
    "SyntheticFrames",
    "generate_synthetic_stream",
    "load_stream",
    "open_stream",
    "read_stream",
    "select_frames",
    "synthetic_stream_id",
    "write_stream",
)


_SYNTHETIC_PREFIX = b"veriframe-synthetic"


def write_stream(
    header: StreamHeader, frames: Iterable[Frame], sink: BinaryIO
) -> int:
    """Writes a complete SFV1 container to the given binary sink.

    Parameters:
        header: the header of the stream
        frames: the frames of the stream, with contiguous indices starting
            from zero; their number must match the frame count of the header
        sink: the binary stream to write to

    Returns:
        the number of bytes written

    Raises:
        InvalidFrameError: if a frame has the wrong size or index, or the
            number of frames does not match the header
    """
    header.validate()

    written = sink.write(header.encode())
    expected_index = 0
    for frame in frames:
        if frame.index != expected_index:
            raise InvalidFrameError(
                frame.index, f"expected frame {expected_index} at this position"
            )
        if expected_index >= header.frame_count:
            raise InvalidFrameError(
                frame.index, f"stream declares only {header.frame_count} frames"
            )
        if len(frame.pixels) != header.frame_size:
            raise InvalidFrameError(
                frame.index,
                f"has {len(frame.pixels)} bytes, expected {header.frame_size}",
            )
        written += sink.write(frame.pixels)
        expected_index += 1

    if expected_index != header.frame_count:
        raise InvalidFrameError(
            expected_index,
            f"missing; stream declares {header.frame_count} frames",
        )

    return written


def read_stream(source: BinaryIO) -> Tuple[StreamHeader, Iterator[Frame]]:
    """Reads an SFV1 container from the given binary source.

    The header is parsed eagerly; frames are read lazily, in index order, as
    the returned iterator is consumed.

    Raises:
        ParseError: if the header is truncated, has a bad magic or violates
            the header invariants; the iterator raises it for a truncated frame
    """
    data = source.read(HEADER_SIZE)
    header = StreamHeader.decode(data)
    return header, _iter_frames(header, source)


def _iter_frames(header: StreamHeader, source: BinaryIO) -> Iterator[Frame]:
    frame_size = header.frame_size
    offset = HEADER_SIZE
    for index in range(header.frame_count):
        pixels = source.read(frame_size)
        if len(pixels) != frame_size:
            raise ParseError(
                f"truncated frame {index}: got {len(pixels)} of {frame_size} bytes",
                offset + len(pixels),
            )
        yield Frame(index, pixels)
        offset += frame_size


@contextmanager
def open_stream(path: Union[str, Path]) -> Iterator[Tuple[StreamHeader, Iterator[Frame]]]:
    """Context manager that opens an SFV1 file and yields its header and a
    lazy frame iterator.
    """
    with open(path, "rb") as fp:
        yield read_stream(fp)


def load_stream(path: Union[str, Path]) -> Tuple[StreamHeader, List[Frame]]:
    """Reads an SFV1 file completely into memory."""
    with open_stream(path) as (header, frames):
        return header, list(frames)


def select_frames(policy: SelectionPolicy, frame_count: int) -> List[int]:
    """Returns the indices of the frames selected by the given policy, in
    increasing order.

    Raises:
        InvalidPolicyError: if the frame count is negative
    """
    if frame_count < 0:
        raise InvalidPolicyError(f"frame count must not be negative: {frame_count}")
    return list(range(0, frame_count, policy.period))


def synthetic_stream_id(seed: int) -> bytes:
    """Derives a deterministic 16-byte stream identifier from a seed."""
    return shake_128(b"veriframe-stream" + seed.to_bytes(8, "little")).digest(16)


def synthetic_pixels(seed: int, index: int, size: int) -> bytes:
    """Returns the pixels of the synthetic frame with the given index."""
    message = _SYNTHETIC_PREFIX + seed.to_bytes(8, "little") + index.to_bytes(8, "little")
    return shake_128(message).digest(size)


class SyntheticFrames(Sequence[Frame]):
    """Lazy, random-access sequence of the frames of a synthetic stream.

    Frames are regenerated on every access, so holding this object costs no
    memory beyond the header.
    """

    _header: StreamHeader
    _seed: int

    def __init__(self, header: StreamHeader, seed: int):
        self._header = header
        self._seed = seed

    @overload
    def __getitem__(self, index: int) -> Frame: ...

    @overload
    def __getitem__(self, index: slice) -> Sequence[Frame]: ...

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            raise IndexError(index)
        return Frame(index, synthetic_pixels(self._seed, index, self._header.frame_size))

    def __len__(self) -> int:
        return self._header.frame_count


def generate_synthetic_stream(
    header: StreamHeader, seed: int
) -> Tuple[StreamHeader, SyntheticFrames]:
    """Generates a deterministic synthetic stream for the given header.

    The same header and seed produce byte-identical frames on every platform.
    """
    header.validate()
    return header, SyntheticFrames(header, seed)
