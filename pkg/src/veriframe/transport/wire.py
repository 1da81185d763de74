"""Wire formats of the two capture channels.

Reliable (digest) channel: every message is a little-endian u32 payload
length followed by the payload. The first payload byte is the message type:

  - 1 = digest record: the `DigestRecord` wire encoding follows
  - 2 = stream announce: the 41-byte SFV1 header follows
  - 3 = end of stream: the 16-byte stream id follows

Lossy (frame) channel: one datagram per frame fragment, laid out as
stream id (16 bytes), frame id (u64), fragment index (u16), fragment count
(u16), payload length (u16) and at most `MAX_FRAGMENT_PAYLOAD` payload bytes,
all little-endian.
"""

from dataclasses import dataclass
from enum import IntEnum
from struct import Struct
from threading import Lock
from typing import BinaryIO, Dict, List, Optional, Set, Tuple, Union

from veriframe.errors import ParseError, ProtocolError
from veriframe.model import DigestRecord, StreamHeader
from veriframe.model.stream import HEADER_SIZE
from veriframe.utils import ceil_div

__all__ = (
    "DATAGRAM_HEADER_SIZE",
    "EndOfStream",
    "FrameDatagram",
    "HashChannelMessage",
    "MAX_FRAGMENT_PAYLOAD",
    "MessageType",
    "Reassembler",
    "StreamAnnounce",
    "decode_message",
    "encode_message",
    "fragment_frame",
    "frame_payload",
    "read_framed",
)


MAX_FRAGMENT_PAYLOAD = 1400
"""Maximum number of pixel bytes carried by a single datagram."""

MAX_MESSAGE_SIZE = 1 << 20
"""Upper bound on reliable-channel payloads; anything larger is a protocol
violation.
"""

_LENGTH_STRUCT = Struct("<I")
_DATAGRAM_STRUCT = Struct("<16sQHHH")

DATAGRAM_HEADER_SIZE = _DATAGRAM_STRUCT.size


class MessageType(IntEnum):
    """Types of the messages on the reliable digest channel."""

    DIGEST_RECORD = 1
    STREAM_ANNOUNCE = 2
    END_OF_STREAM = 3


@dataclass(frozen=True)
class StreamAnnounce:
    """Announces a stream before any of its digest records."""

    header: StreamHeader


@dataclass(frozen=True)
class EndOfStream:
    """Marks that no more digest records follow for a stream."""

    stream_id: bytes


HashChannelMessage = Union[StreamAnnounce, DigestRecord, EndOfStream]


def encode_message(message: HashChannelMessage) -> bytes:
    """Encodes a reliable-channel message into its payload (without the
    length prefix).
    """
    if isinstance(message, DigestRecord):
        return bytes((MessageType.DIGEST_RECORD,)) + message.encode()
    elif isinstance(message, StreamAnnounce):
        return bytes((MessageType.STREAM_ANNOUNCE,)) + message.header.encode()
    elif isinstance(message, EndOfStream):
        return bytes((MessageType.END_OF_STREAM,)) + message.stream_id
    else:
        raise TypeError(f"not a hash channel message: {message!r}")


def decode_message(payload: bytes) -> HashChannelMessage:
    """Decodes a reliable-channel payload.

    Raises:
        ProtocolError: if the payload is malformed
    """
    if not payload:
        raise ProtocolError("empty message on digest channel")

    try:
        msg_type = MessageType(payload[0])
    except ValueError:
        raise ProtocolError(f"unknown message type: {payload[0]}") from None

    body = payload[1:]
    try:
        if msg_type is MessageType.DIGEST_RECORD:
            record, end = DigestRecord.decode(body)
            if end != len(body):
                raise ParseError("trailing bytes after digest record", end + 1)
            return record
        elif msg_type is MessageType.STREAM_ANNOUNCE:
            if len(body) != HEADER_SIZE:
                raise ParseError(
                    f"stream announce must carry {HEADER_SIZE} header bytes", 1
                )
            return StreamAnnounce(StreamHeader.decode(body))
        else:
            if len(body) != 16:
                raise ParseError("end of stream must carry a 16-byte stream id", 1)
            return EndOfStream(bytes(body))
    except ParseError as ex:
        raise ProtocolError(f"malformed {msg_type.name.lower()} message: {ex}") from None


def frame_payload(payload: bytes) -> bytes:
    """Prepends the u32 length prefix to a reliable-channel payload."""
    return _LENGTH_STRUCT.pack(len(payload)) + payload


def _read_exactly(source: BinaryIO, size: int) -> bytes:
    chunks: List[bytes] = []
    remaining = size
    while remaining > 0:
        chunk = source.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_framed(source: BinaryIO) -> Optional[bytes]:
    """Reads one length-prefixed payload from a binary stream.

    Returns:
        the payload, or ``None`` if the stream ended cleanly at a message
        boundary

    Raises:
        ProtocolError: if the stream ends in the middle of a message or the
            declared length is unreasonable
    """
    prefix = _read_exactly(source, _LENGTH_STRUCT.size)
    if not prefix:
        return None
    if len(prefix) < _LENGTH_STRUCT.size:
        raise ProtocolError("connection closed inside a length prefix")

    (length,) = _LENGTH_STRUCT.unpack(prefix)
    if length > MAX_MESSAGE_SIZE:
        raise ProtocolError(f"message of {length} bytes exceeds the size limit")

    payload = _read_exactly(source, length)
    if len(payload) != length:
        raise ProtocolError(
            f"connection closed after {len(payload)} of {length} payload bytes"
        )
    return payload


@dataclass(frozen=True)
class FrameDatagram:
    """One fragment of a frame on the lossy frame channel."""

    stream_id: bytes
    frame_id: int
    frag_index: int
    frag_count: int
    payload: bytes

    @classmethod
    def decode(cls, data: bytes) -> "FrameDatagram":
        """Decodes a datagram.

        Raises:
            ParseError: if the datagram is malformed
        """
        if len(data) < DATAGRAM_HEADER_SIZE:
            raise ParseError("datagram shorter than its header", len(data))

        stream_id, frame_id, frag_index, frag_count, payload_len = (
            _DATAGRAM_STRUCT.unpack_from(data, 0)
        )
        if payload_len > MAX_FRAGMENT_PAYLOAD:
            raise ParseError(f"payload length {payload_len} exceeds limit", 28)
        if len(data) != DATAGRAM_HEADER_SIZE + payload_len:
            raise ParseError(
                "declared payload length does not match datagram size", 28
            )
        if frag_index >= frag_count:
            raise ParseError(
                f"fragment index {frag_index} not below count {frag_count}", 24
            )
        return cls(
            stream_id=stream_id,
            frame_id=frame_id,
            frag_index=frag_index,
            frag_count=frag_count,
            payload=bytes(data[DATAGRAM_HEADER_SIZE:]),
        )

    def encode(self) -> bytes:
        return (
            _DATAGRAM_STRUCT.pack(
                self.stream_id,
                self.frame_id,
                self.frag_index,
                self.frag_count,
                len(self.payload),
            )
            + self.payload
        )


def fragment_frame(
    stream_id: bytes, frame_id: int, pixels: bytes
) -> List[FrameDatagram]:
    """Splits the pixels of a frame into datagrams of at most
    `MAX_FRAGMENT_PAYLOAD` payload bytes each.
    """
    count = max(ceil_div(len(pixels), MAX_FRAGMENT_PAYLOAD), 1)
    if count > 0xFFFF:
        raise ValueError(f"frame of {len(pixels)} bytes needs too many fragments")

    view = memoryview(pixels)
    return [
        FrameDatagram(
            stream_id=stream_id,
            frame_id=frame_id,
            frag_index=index,
            frag_count=count,
            payload=view[
                index * MAX_FRAGMENT_PAYLOAD : (index + 1) * MAX_FRAGMENT_PAYLOAD
            ].tobytes(),
        )
        for index in range(count)
    ]


class Reassembler:
    """Collects datagrams and reassembles complete frames.

    Fragments may arrive in any order; duplicates are ignored, including
    duplicates of fragments of recently completed frames. Partially received
    frames are evicted oldest first once there are more than `max_pending`
    of them or they hold more than `max_pending_bytes` of payload. Streams
    passed to `close_stream()` are ignored from then on.

    Safe to use from a receive loop while another thread closes streams.
    """

    max_pending: int
    max_pending_bytes: int
    max_completed: int

    _pending: Dict[Tuple[bytes, int], Dict[int, bytes]]
    _counts: Dict[Tuple[bytes, int], int]
    _completed: Dict[Tuple[bytes, int], None]
    _closed: Set[bytes]
    _pending_bytes: int

    def __init__(
        self,
        *,
        max_pending: int = 1024,
        max_pending_bytes: int = 256 << 20,
        max_completed: int = 65536,
    ):
        if min(max_pending, max_pending_bytes, max_completed) < 1:
            raise ValueError("reassembly limits must be positive")
        self.max_pending = max_pending
        self.max_pending_bytes = max_pending_bytes
        self.max_completed = max_completed
        self._pending = {}
        self._counts = {}
        self._completed = {}
        self._closed = set()
        self._pending_bytes = 0
        self._lock = Lock()

    def add(self, datagram: FrameDatagram) -> Optional[bytes]:
        """Adds a datagram.

        Returns:
            the pixels of the frame if this datagram completed it, ``None``
            otherwise

        Raises:
            ParseError: if the datagram disagrees with earlier fragments of the
                same frame about the fragment count
        """
        key = (datagram.stream_id, datagram.frame_id)
        with self._lock:
            if datagram.stream_id in self._closed or key in self._completed:
                return None

            count = self._counts.get(key)
            if count is None:
                while len(self._pending) >= self.max_pending:
                    self._drop_pending(next(iter(self._pending)))
                count = self._counts[key] = datagram.frag_count
                self._pending[key] = {}
            elif count != datagram.frag_count:
                raise ParseError(
                    f"frame {datagram.frame_id} fragment count changed from "
                    f"{count} to {datagram.frag_count}"
                )

            fragments = self._pending[key]
            if datagram.frag_index not in fragments:
                fragments[datagram.frag_index] = datagram.payload
                self._pending_bytes += len(datagram.payload)
            if len(fragments) < count:
                while self._pending_bytes > self.max_pending_bytes:
                    oldest = next(iter(self._pending))
                    self._drop_pending(oldest)
                    if oldest == key:
                        return None
                return None

            self._drop_pending(key)
            while len(self._completed) >= self.max_completed:
                del self._completed[next(iter(self._completed))]
            self._completed[key] = None
        return b"".join(fragments[index] for index in range(count))

    def close_stream(self, stream_id: bytes) -> None:
        """Forgets every fragment of the given stream and ignores its
        datagrams from now on.
        """
        with self._lock:
            self._closed.add(stream_id)
            for key in [key for key in self._pending if key[0] == stream_id]:
                self._drop_pending(key)
            for key in [key for key in self._completed if key[0] == stream_id]:
                del self._completed[key]

    def is_closed(self, stream_id: bytes) -> bool:
        with self._lock:
            return stream_id in self._closed

    def incomplete_frames(self, stream_id: bytes) -> List[int]:
        """Returns the ids of the frames of a stream that have some but not
        all of their fragments.
        """
        with self._lock:
            return sorted(
                frame_id for sid, frame_id in self._pending if sid == stream_id
            )

    def _drop_pending(self, key: Tuple[bytes, int]) -> None:
        fragments = self._pending.pop(key)
        self._pending_bytes -= sum(len(payload) for payload in fragments.values())
        del self._counts[key]
