from dataclasses import dataclass
from enum import Enum, IntEnum
from struct import Struct
from typing import Tuple

from veriframe.errors import InvalidPolicyError, ParseError

from .base import parse_parametrized_spec

__all__ = ("DigestAlgorithm", "DigestRecord", "WriteMode", "WriteModeKind")


class DigestAlgorithm(Enum):
    """Digest algorithms that can be used to fingerprint frames.

    SHA-256 is the recommended choice for real evidence; MD5 is kept so the
    two can be compared in benchmarks.
    """

    MD5 = 1
    SHA256 = 2

    @classmethod
    def from_string(cls, value: str) -> "DigestAlgorithm":
        name = value.strip().lower().replace("-", "")
        for algorithm in cls:
            if algorithm.name.lower() == name:
                return algorithm
        raise InvalidPolicyError(f"unknown digest algorithm: {value!r}")

    def __str__(self) -> str:
        return self.name.lower()

    @property
    def digest_size(self) -> int:
        """Length of the digests produced by the algorithm in bytes."""
        return 16 if self is DigestAlgorithm.MD5 else 32

    @property
    def hashlib_name(self) -> str:
        return "md5" if self is DigestAlgorithm.MD5 else "sha256"


class WriteModeKind(IntEnum):
    """Enum representing how selected frames are turned into ledger records."""

    PER_FRAME = 0
    BATCH_BYTES = 1
    BATCH_DIGESTS = 2


_MODE_NAMES = {
    "perframe": WriteModeKind.PER_FRAME,
    "batchbytes": WriteModeKind.BATCH_BYTES,
    "batchdigests": WriteModeKind.BATCH_DIGESTS,
}


@dataclass(frozen=True)
class WriteMode:
    """Write strategy together with its batch size."""

    kind: WriteModeKind = WriteModeKind.PER_FRAME
    """The write strategy."""

    k: int = 1
    """Number of selected frames covered by one record; 1 for `PER_FRAME`."""

    def __post_init__(self):
        if self.k < 1:
            raise InvalidPolicyError(f"batch size must be at least 1, got {self.k}")
        if self.kind is WriteModeKind.PER_FRAME and self.k != 1:
            raise InvalidPolicyError("per-frame mode has no batch size")

    @classmethod
    def per_frame(cls) -> "WriteMode":
        return cls(WriteModeKind.PER_FRAME, 1)

    @classmethod
    def batch_bytes(cls, k: int) -> "WriteMode":
        return cls(WriteModeKind.BATCH_BYTES, k)

    @classmethod
    def batch_digests(cls, k: int) -> "WriteMode":
        return cls(WriteModeKind.BATCH_DIGESTS, k)

    @classmethod
    def from_string(cls, value: str) -> "WriteMode":
        """Constructs a write mode from its command line spelling:
        ``perframe``, ``batchbytes:<k>`` or ``batchdigests:<k>``.
        """
        name, param = parse_parametrized_spec(value, what="write mode")
        try:
            kind = _MODE_NAMES[name]
        except KeyError:
            raise InvalidPolicyError(f"unknown write mode: {value!r}") from None

        if kind is WriteModeKind.PER_FRAME:
            if param is not None:
                raise InvalidPolicyError("per-frame mode has no batch size")
            return cls.per_frame()
        if param is None:
            raise InvalidPolicyError(f"write mode {name!r} needs a batch size")
        return cls(kind, param)

    def __str__(self) -> str:
        name = self.kind.name.lower().replace("_", "")
        return name if self.kind is WriteModeKind.PER_FRAME else f"{name}:{self.k}"


_RECORD_STRUCT = Struct("<16sBQQQBB")


@dataclass(frozen=True)
class DigestRecord:
    """The unit written to the ledger: a digest binding a stream and an
    inclusive range of frame ids under a declared algorithm and write mode.

    The frame ids travel beside the digest; they are not part of its input.
    """

    stream_id: bytes
    """Identifier of the stream that the record belongs to."""

    mode: WriteMode
    """Write mode that produced the record."""

    frame_id_start: int
    """First frame id covered by the record."""

    frame_id_end: int
    """Last frame id covered by the record (inclusive)."""

    algorithm: DigestAlgorithm
    """Digest algorithm that produced `digest`."""

    digest: bytes
    """The digest itself."""

    @classmethod
    def decode(cls, data: bytes, offset: int = 0) -> Tuple["DigestRecord", int]:
        """Decodes a record from its wire encoding.

        Returns:
            the decoded record and the offset just past it

        Raises:
            ParseError: if the encoding is truncated or invalid
        """
        if len(data) - offset < _RECORD_STRUCT.size:
            raise ParseError("truncated digest record", offset)

        stream_id, mode, k, start, end, algorithm, digest_len = (
            _RECORD_STRUCT.unpack_from(data, offset)
        )
        body_start = offset + _RECORD_STRUCT.size
        body_end = body_start + digest_len
        if body_end > len(data):
            raise ParseError("truncated digest in digest record", body_start)

        try:
            record = cls(
                stream_id=stream_id,
                mode=WriteMode(WriteModeKind(mode), k),
                frame_id_start=start,
                frame_id_end=end,
                algorithm=DigestAlgorithm(algorithm),
                digest=bytes(data[body_start:body_end]),
            )
            record.validate()
        except (ValueError, InvalidPolicyError) as ex:
            raise ParseError(f"invalid digest record: {ex}", offset) from None

        return record, body_end

    def encode(self) -> bytes:
        """Returns the little-endian wire encoding of the record."""
        return (
            _RECORD_STRUCT.pack(
                self.stream_id,
                int(self.mode.kind),
                self.mode.k,
                self.frame_id_start,
                self.frame_id_end,
                self.algorithm.value,
                len(self.digest),
            )
            + self.digest
        )

    def covers(self, frame_id: int) -> bool:
        """Returns whether the covered range includes the given frame id."""
        return self.frame_id_start <= frame_id <= self.frame_id_end

    @property
    def key(self) -> Tuple[bytes, int, int, DigestAlgorithm, WriteMode]:
        """Key identifying duplicate submissions of the same record."""
        return (
            self.stream_id,
            self.frame_id_start,
            self.frame_id_end,
            self.algorithm,
            self.mode,
        )

    def validate(self) -> None:
        """Checks the record invariants.

        Raises:
            ValueError: if an invariant is violated
        """
        if len(self.stream_id) != 16:
            raise ValueError("stream id must be 16 bytes")
        if self.frame_id_start > self.frame_id_end:
            raise ValueError(
                f"empty frame range {self.frame_id_start}-{self.frame_id_end}"
            )
        if (
            self.mode.kind is WriteModeKind.PER_FRAME
            and self.frame_id_start != self.frame_id_end
        ):
            raise ValueError("per-frame record must cover exactly one frame")
        if len(self.digest) != self.algorithm.digest_size:
            raise ValueError(
                f"{self.algorithm} digest must be {self.algorithm.digest_size} "
                f"bytes, got {len(self.digest)}"
            )
