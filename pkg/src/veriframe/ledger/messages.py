"""Consensus messages exchanged between the nodes of a cluster.

Every message is encoded as an opcode byte, the u16 id of the sending node,
and a per-type body (little-endian):

  - 0x10 Propose: height u64, attempt u16, the leader's vote on the header,
    then the canonical block encoding
  - 0x11 SignedRelay: height u64, attempt u16, header hash (32 bytes), vote
  - 0x12 Confirm: height u64, attempt u16, header hash (32 bytes), vote set
  - 0x13 Gossip: a `DigestRecord` wire encoding

Votes use the same encoding as in the block log.
"""

from dataclasses import dataclass
from enum import IntEnum
from struct import Struct
from typing import Tuple, Union

from veriframe.errors import ParseError, ProtocolError
from veriframe.model import DigestRecord

from .blocks import Block, Vote, decode_votes, encode_votes

__all__ = (
    "Confirm",
    "ConsensusMessage",
    "Gossip",
    "MessageKind",
    "Propose",
    "SignedRelay",
    "decode_consensus_message",
    "encode_consensus_message",
)


class MessageKind(IntEnum):
    """Opcodes of the node-to-node messages."""

    PROPOSE = 0x10
    SIGNED_RELAY = 0x11
    CONFIRM = 0x12
    GOSSIP = 0x13


_PREFIX = Struct("<BH")
_ROUND = Struct("<QH")


@dataclass(frozen=True)
class Propose:
    """A block proposed by the leader, signed by the leader itself."""

    sender: int
    attempt: int
    block: Block
    leader_vote: Vote

    @property
    def height(self) -> int:
        return self.block.height


@dataclass(frozen=True)
class SignedRelay:
    """A validator's signed copy of a proposed header, sent to every other
    member.
    """

    sender: int
    height: int
    attempt: int
    vote: Vote

    @property
    def block_header_hash(self) -> bytes:
        return self.vote.block_header_hash


@dataclass(frozen=True)
class Confirm:
    """Tells the leader that a validator committed a block, with the votes
    that the validator collected.
    """

    sender: int
    height: int
    attempt: int
    block_header_hash: bytes
    votes: Tuple[Vote, ...]


@dataclass(frozen=True)
class Gossip:
    """A submitted transaction forwarded to the other members."""

    sender: int
    record: DigestRecord


ConsensusMessage = Union[Propose, SignedRelay, Confirm, Gossip]


def encode_consensus_message(message: ConsensusMessage) -> bytes:
    if isinstance(message, Propose):
        return (
            _PREFIX.pack(MessageKind.PROPOSE, message.sender)
            + _ROUND.pack(message.height, message.attempt)
            + message.leader_vote.encode()
            + message.block.encode()
        )
    elif isinstance(message, SignedRelay):
        return (
            _PREFIX.pack(MessageKind.SIGNED_RELAY, message.sender)
            + _ROUND.pack(message.height, message.attempt)
            + message.block_header_hash
            + message.vote.encode()
        )
    elif isinstance(message, Confirm):
        return (
            _PREFIX.pack(MessageKind.CONFIRM, message.sender)
            + _ROUND.pack(message.height, message.attempt)
            + message.block_header_hash
            + encode_votes(message.votes)
        )
    elif isinstance(message, Gossip):
        return _PREFIX.pack(MessageKind.GOSSIP, message.sender) + message.record.encode()
    else:
        raise TypeError(f"not a consensus message: {message!r}")


def _read_hash(data: bytes, offset: int) -> Tuple[bytes, int]:
    end = offset + 32
    if end > len(data):
        raise ParseError("truncated header hash", offset)
    return bytes(data[offset:end]), end


def decode_consensus_message(data: bytes) -> ConsensusMessage:
    """Decodes a node-to-node message.

    Raises:
        ProtocolError: if the message is malformed
    """
    if len(data) < _PREFIX.size:
        raise ProtocolError("consensus message shorter than its prefix")

    opcode, sender = _PREFIX.unpack_from(data, 0)
    try:
        kind = MessageKind(opcode)
    except ValueError:
        raise ProtocolError(f"unknown consensus opcode: 0x{opcode:02x}") from None

    offset = _PREFIX.size
    try:
        if kind is MessageKind.GOSSIP:
            record, offset = DigestRecord.decode(data, offset)
            message: ConsensusMessage = Gossip(sender, record)
        else:
            if len(data) - offset < _ROUND.size:
                raise ParseError("truncated round number", offset)
            height, attempt = _ROUND.unpack_from(data, offset)
            offset += _ROUND.size

            if kind is MessageKind.PROPOSE:
                # The leader vote precedes the block, so its hash is filled in
                # once the block has been decoded.
                vote, offset = Vote.decode(data, offset, b"")
                block, offset = Block.decode(data, offset)
                if block.height != height:
                    raise ParseError("proposal height does not match its block")
                message = Propose(
                    sender,
                    attempt,
                    block,
                    Vote(vote.validator_id, block.header.hash, vote.signature),
                )
            elif kind is MessageKind.SIGNED_RELAY:
                header_hash, offset = _read_hash(data, offset)
                vote, offset = Vote.decode(data, offset, header_hash)
                message = SignedRelay(sender, height, attempt, vote)
            else:
                header_hash, offset = _read_hash(data, offset)
                votes, offset = decode_votes(data, offset, header_hash)
                message = Confirm(sender, height, attempt, header_hash, tuple(votes))
    except ParseError as ex:
        raise ProtocolError(f"malformed {kind.name.lower()} message: {ex}") from None

    if offset != len(data):
        raise ProtocolError(f"trailing bytes after {kind.name.lower()} message")
    return message
