"""Blocks, transactions and votes, and their canonical encodings.

Canonical block encoding (little-endian): height u64, prev_hash 32 bytes,
tx_root 32 bytes, timestamp u64 (microseconds since the epoch), leader_id u16,
tx_count u32, then each transaction as its `DigestRecord` wire encoding.
A persisted block is followed by its vote set: count u16, then for each vote
validator_id u16, sig_len u16 and the signature.

Two hashes are derived from a block: the *block hash* (SHA-256 of the whole
canonical encoding), which the next block stores as ``prev_hash``, and the
*header hash* (SHA-256 of the header fields up to ``leader_id``), which the
validators sign. The header commits to the body through ``tx_root``.
"""

from dataclasses import dataclass, field
from hashlib import sha256
from struct import Struct
from typing import (
    AbstractSet,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
)

from veriframe.errors import ParseError, StaleTipError
from veriframe.model import DigestRecord

__all__ = (
    "Block",
    "BlockHeader",
    "CommittedBlock",
    "Transaction",
    "Vote",
    "ZERO_HASH",
    "assemble_block",
    "compute_tx_root",
    "decode_votes",
    "encode_votes",
    "genesis_block",
)


ZERO_HASH = bytes(32)
"""The ``prev_hash`` of the genesis block."""

_HEADER_STRUCT = Struct("<Q32s32sQH")
_COUNT32 = Struct("<I")
_COUNT16 = Struct("<H")
_VOTE_STRUCT = Struct("<HH")


def compute_tx_root(tx_hashes: Iterable[bytes]) -> bytes:
    """Returns the SHA-256 digest of the concatenated transaction hashes."""
    hasher = sha256()
    for tx_hash in tx_hashes:
        hasher.update(tx_hash)
    return hasher.digest()


@dataclass(frozen=True)
class Transaction:
    """A digest record waiting in (or included from) a transaction pool."""

    record: DigestRecord
    """The submitted digest record."""

    receipt_time: int = 0
    """Time when the node received the record, in microseconds."""

    tx_hash: bytes = field(init=False)
    """SHA-256 of the canonical wire encoding of the record."""

    def __post_init__(self):
        object.__setattr__(self, "tx_hash", sha256(self.record.encode()).digest())


@dataclass(frozen=True)
class BlockHeader:
    """Header of a block."""

    height: int
    prev_hash: bytes
    tx_root: bytes
    timestamp: int
    """Time of assembly in microseconds since the epoch."""
    leader_id: int
    """Identifier of the member that assembled the block."""

    def encode(self) -> bytes:
        return _HEADER_STRUCT.pack(
            self.height, self.prev_hash, self.tx_root, self.timestamp, self.leader_id
        )

    @property
    def hash(self) -> bytes:
        """The header hash that validators sign."""
        return sha256(self.encode()).digest()


@dataclass(frozen=True)
class Block:
    """A block of digest records chained to its predecessor."""

    header: BlockHeader
    records: Tuple[DigestRecord, ...] = ()

    @classmethod
    def decode(cls, data: bytes, offset: int = 0) -> Tuple["Block", int]:
        """Decodes the canonical encoding of a block (without votes).

        Returns:
            the block and the offset just past its encoding

        Raises:
            ParseError: if the encoding is truncated or contains an invalid
                record
        """
        if len(data) - offset < _HEADER_STRUCT.size + _COUNT32.size:
            raise ParseError("truncated block header", offset)

        height, prev_hash, tx_root, timestamp, leader_id = _HEADER_STRUCT.unpack_from(
            data, offset
        )
        offset += _HEADER_STRUCT.size
        (tx_count,) = _COUNT32.unpack_from(data, offset)
        offset += _COUNT32.size

        records: List[DigestRecord] = []
        for _ in range(tx_count):
            record, offset = DigestRecord.decode(data, offset)
            records.append(record)

        header = BlockHeader(height, prev_hash, tx_root, timestamp, leader_id)
        return cls(header, tuple(records)), offset

    def encode(self) -> bytes:
        """Returns the canonical encoding of the block (without votes)."""
        parts = [self.header.encode(), _COUNT32.pack(len(self.records))]
        parts.extend(record.encode() for record in self.records)
        return b"".join(parts)

    @property
    def hash(self) -> bytes:
        """The block hash that the next block refers to."""
        return sha256(self.encode()).digest()

    @property
    def height(self) -> int:
        return self.header.height

    @property
    def tx_hashes(self) -> List[bytes]:
        return [Transaction(record).tx_hash for record in self.records]

    def has_consistent_tx_root(self) -> bool:
        """Returns whether the header's tx_root matches the body."""
        return compute_tx_root(self.tx_hashes) == self.header.tx_root


@dataclass(frozen=True)
class Vote:
    """Signature of a member over a block header hash."""

    validator_id: int
    block_header_hash: bytes
    signature: bytes

    def encode(self) -> bytes:
        """Encodes the vote without its header hash, which is implied by
        the context it appears in.
        """
        return _VOTE_STRUCT.pack(self.validator_id, len(self.signature)) + self.signature

    @classmethod
    def decode(
        cls, data: bytes, offset: int, block_header_hash: bytes
    ) -> Tuple["Vote", int]:
        if len(data) - offset < _VOTE_STRUCT.size:
            raise ParseError("truncated vote", offset)
        validator_id, sig_len = _VOTE_STRUCT.unpack_from(data, offset)
        start = offset + _VOTE_STRUCT.size
        end = start + sig_len
        if end > len(data):
            raise ParseError("truncated vote signature", start)
        return cls(validator_id, block_header_hash, bytes(data[start:end])), end


def encode_votes(votes: Sequence[Vote]) -> bytes:
    """Encodes a vote set as it is persisted after a block."""
    return _COUNT16.pack(len(votes)) + b"".join(vote.encode() for vote in votes)


def decode_votes(
    data: bytes, offset: int, block_header_hash: bytes
) -> Tuple[List[Vote], int]:
    """Decodes a vote set persisted after a block."""
    if len(data) - offset < _COUNT16.size:
        raise ParseError("truncated vote count", offset)
    (count,) = _COUNT16.unpack_from(data, offset)
    offset += _COUNT16.size
    votes: List[Vote] = []
    for _ in range(count):
        vote, offset = Vote.decode(data, offset, block_header_hash)
        votes.append(vote)
    return votes, offset


def genesis_block(timestamp: int = 0) -> Block:
    """Returns the genesis block of a cluster with the given genesis timestamp."""
    header = BlockHeader(
        height=0,
        prev_hash=ZERO_HASH,
        tx_root=compute_tx_root(()),
        timestamp=timestamp,
        leader_id=0,
    )
    return Block(header, ())


def assemble_block(
    pending: Iterable[Transaction],
    tip: Block,
    leader_id: int,
    *,
    height: int,
    timestamp: int,
    max_txs: int = 100,
    committed_keys: AbstractSet[tuple] = frozenset(),
) -> Optional[Block]:
    """Assembles the next block from the pending transactions.

    Transactions are ordered by receipt time, then by transaction hash.
    Duplicate submissions of the same record, and records already on the
    chain, are included at most once (resp. not at all).

    Parameters:
        pending: the transaction pool of the leader
        tip: the current chain tip of the leader
        leader_id: identifier of the leader assembling the block
        height: height of the block being assembled
        timestamp: assembly time in microseconds
        max_txs: maximum number of transactions per block
        committed_keys: keys of the records already on the chain

    Returns:
        the block, or ``None`` if there was nothing to include

    Raises:
        StaleTipError: if `height` does not directly follow the tip
    """
    if height != tip.height + 1:
        raise StaleTipError(
            f"cannot assemble block {height} on a tip at height {tip.height}"
        )

    seen = set(committed_keys)
    selected: List[Transaction] = []
    for tx in sorted(pending, key=lambda tx: (tx.receipt_time, tx.tx_hash)):
        key = tx.record.key
        if key in seen:
            continue
        seen.add(key)
        selected.append(tx)
        if len(selected) >= max_txs:
            break

    if not selected:
        return None

    header = BlockHeader(
        height=height,
        prev_hash=tip.hash,
        tx_root=compute_tx_root(tx.tx_hash for tx in selected),
        timestamp=max(timestamp, tip.header.timestamp),
        leader_id=leader_id,
    )
    return Block(header, tuple(tx.record for tx in selected))


@dataclass(frozen=True)
class CommittedBlock:
    """A block together with the vote set it was committed with, as it is
    persisted in the block log.
    """

    block: Block
    votes: Tuple[Vote, ...] = ()

    @property
    def height(self) -> int:
        return self.block.height

    def encode(self) -> bytes:
        return self.block.encode() + encode_votes(self.votes)

    @classmethod
    def decode(cls, data: bytes) -> "CommittedBlock":
        """Decodes a block log record, which must contain exactly one block
        and its vote set.

        Raises:
            ParseError: if the record is malformed or has trailing bytes
        """
        block, offset = Block.decode(data, 0)
        votes, offset = decode_votes(data, offset, block.header.hash)
        if offset != len(data):
            raise ParseError(f"{len(data) - offset} trailing bytes in block record", offset)
        return cls(block, tuple(votes))
