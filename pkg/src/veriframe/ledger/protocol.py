"""Client protocol of a ledger node.

Requests and responses travel on a TCP connection, each framed like the
digest channel: a u32 little-endian length, then the payload. A request
payload starts with an opcode:

  - 0x01 SubmitTx: a `DigestRecord` wire encoding
  - 0x02 QueryDigest: stream id (16 bytes), frame id (u64)
  - 0x03 ChainInfo: no body

A response payload starts with a status byte: 0x00 on success, 0xFF on
failure followed by a UTF-8 error message. Successful bodies are empty for
SubmitTx; a u32 count followed by that many entries of height (u64),
timestamp (u64) and record encoding for QueryDigest; and height (u64), tip
hash (32 bytes) and pending transaction count (u32) for ChainInfo.

The opcodes 0x10 to 0x13 are reserved for node-to-node consensus messages
(see `veriframe.ledger.messages`), which share the same port.
"""

from dataclasses import dataclass
from enum import IntEnum
from struct import Struct
from typing import List, Union

from veriframe.errors import LedgerError, ParseError, ProtocolError
from veriframe.model import DigestRecord

from .client import ChainInfo
from .store import LedgerEntry

__all__ = (
    "ChainInfoRequest",
    "Opcode",
    "QueryDigestRequest",
    "Request",
    "STATUS_ERROR",
    "STATUS_OK",
    "decode_chain_info",
    "decode_entries",
    "decode_request",
    "encode_chain_info",
    "encode_entries",
    "encode_request",
    "error_response",
    "unwrap_response",
)


class Opcode(IntEnum):
    SUBMIT_TX = 0x01
    QUERY_DIGEST = 0x02
    CHAIN_INFO = 0x03


STATUS_OK = 0x00
STATUS_ERROR = 0xFF

PEER_OPCODES = range(0x10, 0x20)
"""Opcodes of node-to-node messages."""

_QUERY = Struct("<16sQ")
_COUNT = Struct("<I")
_ENTRY = Struct("<QQ")
_INFO = Struct("<Q32sI")


@dataclass(frozen=True)
class QueryDigestRequest:
    stream_id: bytes
    frame_id: int


@dataclass(frozen=True)
class ChainInfoRequest:
    pass


Request = Union[DigestRecord, QueryDigestRequest, ChainInfoRequest]


def encode_request(request: Request) -> bytes:
    if isinstance(request, DigestRecord):
        return bytes((Opcode.SUBMIT_TX,)) + request.encode()
    elif isinstance(request, QueryDigestRequest):
        return bytes((Opcode.QUERY_DIGEST,)) + _QUERY.pack(request.stream_id, request.frame_id)
    elif isinstance(request, ChainInfoRequest):
        return bytes((Opcode.CHAIN_INFO,))
    else:
        raise TypeError(f"not a ledger request: {request!r}")


def decode_request(payload: bytes) -> Request:
    """Decodes a client request.

    Raises:
        ProtocolError: if the request is malformed
    """
    if not payload:
        raise ProtocolError("empty request")
    try:
        opcode = Opcode(payload[0])
    except ValueError:
        raise ProtocolError(f"unknown opcode: 0x{payload[0]:02x}") from None

    body = payload[1:]
    if opcode is Opcode.SUBMIT_TX:
        try:
            record, end = DigestRecord.decode(body)
        except ParseError as ex:
            raise ProtocolError(f"malformed transaction: {ex}") from None
        if end != len(body):
            raise ProtocolError("trailing bytes after transaction")
        return record
    elif opcode is Opcode.QUERY_DIGEST:
        if len(body) != _QUERY.size:
            raise ProtocolError("malformed digest query")
        return QueryDigestRequest(*_QUERY.unpack(body))
    else:
        if body:
            raise ProtocolError("chain info request has a body")
        return ChainInfoRequest()


def error_response(message: str) -> bytes:
    return bytes((STATUS_ERROR,)) + message.encode("utf-8", errors="replace")


def unwrap_response(payload: bytes) -> bytes:
    """Checks the status of a response and returns its body.

    Raises:
        LedgerError: if the node reported a failure
        ProtocolError: if the response is malformed
    """
    if not payload:
        raise ProtocolError("empty response")
    if payload[0] == STATUS_ERROR:
        raise LedgerError(payload[1:].decode("utf-8", errors="replace"))
    if payload[0] != STATUS_OK:
        raise ProtocolError(f"unknown response status: 0x{payload[0]:02x}")
    return payload[1:]


def encode_entries(entries: List[LedgerEntry]) -> bytes:
    parts = [bytes((STATUS_OK,)), _COUNT.pack(len(entries))]
    for entry in entries:
        parts.append(_ENTRY.pack(entry.height, entry.timestamp))
        parts.append(entry.record.encode())
    return b"".join(parts)


def decode_entries(body: bytes) -> List[LedgerEntry]:
    try:
        if len(body) < _COUNT.size:
            raise ParseError("truncated entry count", 0)
        (count,) = _COUNT.unpack_from(body, 0)
        offset = _COUNT.size
        entries: List[LedgerEntry] = []
        for _ in range(count):
            if len(body) - offset < _ENTRY.size:
                raise ParseError("truncated ledger entry", offset)
            height, timestamp = _ENTRY.unpack_from(body, offset)
            record, offset = DigestRecord.decode(body, offset + _ENTRY.size)
            entries.append(LedgerEntry(record, height, timestamp))
    except ParseError as ex:
        raise ProtocolError(f"malformed query response: {ex}") from None
    if offset != len(body):
        raise ProtocolError("trailing bytes after query response")
    return entries


def encode_chain_info(info: ChainInfo) -> bytes:
    return bytes((STATUS_OK,)) + _INFO.pack(info.height, info.tip_hash, info.pending)


def decode_chain_info(body: bytes) -> ChainInfo:
    if len(body) != _INFO.size:
        raise ProtocolError("malformed chain info response")
    return ChainInfo(*_INFO.unpack(body))
