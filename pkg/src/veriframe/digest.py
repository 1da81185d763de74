"""Canonical frame serialization, digest algorithms and the three ways of
turning selected frames into ledger records.

Write modes:

  - per-frame: one record per selected frame, digest of its pixels
  - batch-bytes: one record per ``k`` consecutive selected frames, digest of
    their concatenated pixels
  - batch-digests: one record per ``k`` consecutive selected frames, digest of
    their concatenated per-frame digests

Batches follow ascending frame index; a final partial batch is digested as
it is rather than dropped.
"""

import hashlib

from time import perf_counter_ns
from typing import Iterable, List, NamedTuple, Optional

from veriframe.model import (
    DigestAlgorithm,
    DigestRecord,
    Frame,
    WriteMode,
    WriteModeKind,
)

__all__ = (
    "RecordBuilder",
    "TimedDigest",
    "digest_bytes",
    "digest_selected",
    "new_hasher",
    "serialize_frame",
    "timed_digest",
)


def serialize_frame(frame: Frame) -> bytes:
    """Converts a frame to the byte string that gets digested.

    The result is a fresh copy of the row-major, channel-interleaved pixel
    payload, without any header or frame index.
    """
    return memoryview(frame.pixels).tobytes()


def new_hasher(algorithm: DigestAlgorithm):
    """Returns a fresh incremental hashlib object for the given algorithm."""
    return hashlib.new(algorithm.hashlib_name)


def digest_bytes(algorithm: DigestAlgorithm, data: bytes) -> bytes:
    """Returns the standard digest of `data` under the given algorithm."""
    hasher = new_hasher(algorithm)
    hasher.update(data)
    return hasher.digest()


class TimedDigest(NamedTuple):
    """Digest of a single frame with the time spent in each step."""

    digest: bytes
    serialize_ns: int
    hash_ns: int

    @property
    def total_ns(self) -> int:
        return self.serialize_ns + self.hash_ns


def timed_digest(frame: Frame, algorithm: DigestAlgorithm) -> TimedDigest:
    """Digests a single frame, timing serialization and hashing separately
    with a monotonic clock.
    """
    started = perf_counter_ns()
    data = serialize_frame(frame)
    serialized = perf_counter_ns()
    digest = digest_bytes(algorithm, data)
    hashed = perf_counter_ns()
    return TimedDigest(digest, serialized - started, hashed - serialized)


class RecordBuilder:
    """Incremental builder that turns selected frames, fed one by one in
    ascending index order, into digest records.

    This is what both the capture agent and the verifier use, so the records
    written at capture time and the ones recomputed at verification time are
    produced by the same code.
    """

    stream_id: bytes
    algorithm: DigestAlgorithm
    mode: WriteMode

    bytes_hashed: int
    """Number of bytes that went into record-level digests so far."""

    _hasher: Optional[object]
    _batch_start: Optional[int]
    _batch_end: int
    _batch_size: int
    _frame_digests: List[bytes]
    _last_index: int

    def __init__(self, stream_id: bytes, algorithm: DigestAlgorithm, mode: WriteMode):
        self.stream_id = stream_id
        self.algorithm = algorithm
        self.mode = mode
        self.bytes_hashed = 0
        self._last_index = -1
        self._reset_batch()

    def feed(self, frame: Frame) -> List[DigestRecord]:
        """Adds the next selected frame and returns the records completed by
        it (zero or one).
        """
        if frame.index <= self._last_index:
            raise ValueError(
                f"frames must be fed in ascending order; got {frame.index} "
                f"after {self._last_index}"
            )
        self._last_index = frame.index

        data = serialize_frame(frame)
        kind = self.mode.kind

        if kind is WriteModeKind.PER_FRAME:
            self.bytes_hashed += len(data)
            return [
                self._make_record(
                    frame.index, frame.index, digest_bytes(self.algorithm, data)
                )
            ]

        if self._batch_start is None:
            self._batch_start = frame.index
        self._batch_end = frame.index
        self._batch_size += 1

        if kind is WriteModeKind.BATCH_BYTES:
            if self._hasher is None:
                self._hasher = new_hasher(self.algorithm)
            self._hasher.update(data)  # type: ignore
            self.bytes_hashed += len(data)
        else:
            self._frame_digests.append(digest_bytes(self.algorithm, data))

        if self._batch_size >= self.mode.k:
            return self.finish()
        return []

    def finish(self) -> List[DigestRecord]:
        """Flushes the current, possibly partial batch and returns its record
        if there was one.
        """
        if self._batch_start is None:
            return []

        if self.mode.kind is WriteModeKind.BATCH_BYTES:
            digest = self._hasher.digest()  # type: ignore
        else:
            joined = b"".join(self._frame_digests)
            self.bytes_hashed += len(joined)
            digest = digest_bytes(self.algorithm, joined)

        record = self._make_record(self._batch_start, self._batch_end, digest)
        self._reset_batch()
        return [record]

    def _make_record(self, start: int, end: int, digest: bytes) -> DigestRecord:
        return DigestRecord(
            stream_id=self.stream_id,
            mode=self.mode,
            frame_id_start=start,
            frame_id_end=end,
            algorithm=self.algorithm,
            digest=digest,
        )

    def _reset_batch(self) -> None:
        self._hasher = None
        self._batch_start = None
        self._batch_end = -1
        self._batch_size = 0
        self._frame_digests = []


def digest_selected(
    frames: Iterable[Frame],
    algorithm: DigestAlgorithm,
    mode: WriteMode,
    stream_id: bytes,
) -> List[DigestRecord]:
    """Turns the selected frames of a stream into digest records.

    Parameters:
        frames: the selected frames, in the order produced by `select_frames()`
        algorithm: the digest algorithm to use
        mode: the write mode deciding how frames are grouped into records
        stream_id: identifier of the stream, copied into every record

    Returns:
        the records in ascending frame order; empty if there were no frames
    """
    builder = RecordBuilder(stream_id, algorithm, mode)
    records: List[DigestRecord] = []
    for frame in frames:
        records.extend(builder.feed(frame))
    records.extend(builder.finish())
    return records
