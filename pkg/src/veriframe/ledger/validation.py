"""Verification of blocks, vote sets and whole persisted chains."""

from dataclasses import dataclass
from pathlib import Path
from struct import Struct
from typing import TYPE_CHECKING, Iterator, Optional, Sequence, Set, Tuple, Union

from veriframe.errors import ParseError

from .blocks import Block, CommittedBlock, Vote, genesis_block
from .cluster import ClusterConfig

if TYPE_CHECKING:
    from .store import BlockStore

__all__ = (
    "ChainViolation",
    "check_block",
    "check_votes",
    "iter_log_records",
    "validate_chain",
)


LOG_LENGTH = Struct("<I")


@dataclass(frozen=True)
class ChainViolation:
    """The first problem found while walking a chain from genesis to tip."""

    height: int
    """Height of the offending block, counted by its position in the log."""

    reason: str

    def __str__(self) -> str:
        return f"height {self.height}: {self.reason}"


def check_votes(
    cluster: ClusterConfig, header_hash: bytes, votes: Sequence[Vote]
) -> Optional[str]:
    """Checks a persisted vote set.

    The votes must be sorted by strictly increasing validator id, each must be
    a valid member signature of `header_hash`, and there must be at least a
    quorum of them.

    Returns:
        the reason why the vote set is invalid, or ``None`` if it is valid
    """
    previous = -1
    for vote in votes:
        if vote.validator_id <= previous:
            return "votes not in canonical order or duplicated"
        previous = vote.validator_id
        if vote.block_header_hash != header_hash:
            return f"vote of member {vote.validator_id} is for another header"
        if not cluster.has_member(vote.validator_id):
            return f"vote from unknown member {vote.validator_id}"
        if not cluster.is_valid_vote(vote):
            return f"invalid signature from member {vote.validator_id}"

    if len(votes) < cluster.quorum:
        return f"only {len(votes)} votes, quorum is {cluster.quorum}"
    return None


def check_block(
    cluster: ClusterConfig,
    block: Block,
    votes: Sequence[Vote],
    prev: Block,
    committed_keys: Optional[Set[tuple]] = None,
) -> Optional[str]:
    """Checks that a block with its vote set may follow `prev` on the chain.

    Returns:
        the reason why the block is invalid, or ``None`` if it is valid
    """
    reason = check_block_body(cluster, block, prev, committed_keys)
    if reason is None:
        reason = check_votes(cluster, block.header.hash, votes)
    return reason


def check_block_body(
    cluster: ClusterConfig,
    block: Block,
    prev: Block,
    committed_keys: Optional[Set[tuple]] = None,
) -> Optional[str]:
    """Same as `check_block()` but without looking at the votes; this is
    what a validator checks before signing a proposal.
    """
    header = block.header
    if header.height != prev.height + 1:
        return f"height {header.height} does not follow {prev.height}"
    if header.prev_hash != prev.hash:
        return "prev_hash does not match the preceding block"
    if not cluster.has_member(header.leader_id):
        return f"leader {header.leader_id} is not a member"
    if header.timestamp < prev.header.timestamp:
        return "timestamp precedes the preceding block"
    if not block.records:
        return "block has no transactions"
    if not block.has_consistent_tx_root():
        return "tx_root mismatch"

    keys: Set[tuple] = set()
    for record in block.records:
        try:
            record.validate()
        except ValueError as ex:
            return f"invalid transaction: {ex}"
        if record.key in keys or (committed_keys and record.key in committed_keys):
            return "duplicate transaction"
        keys.add(record.key)

    return None


def iter_log_records(data: bytes) -> Iterator[Tuple[int, bytes]]:
    """Splits the contents of a block log into its length-prefixed records.

    Yields:
        the offset of each record and its bytes

    Raises:
        ParseError: if the log ends inside a length prefix or a record
    """
    offset = 0
    while offset < len(data):
        if len(data) - offset < LOG_LENGTH.size:
            raise ParseError("truncated record length", offset)
        (length,) = LOG_LENGTH.unpack_from(data, offset)
        start = offset + LOG_LENGTH.size
        end = start + length
        if end > len(data):
            raise ParseError(f"truncated record of {length} bytes", start)
        yield offset, data[start:end]
        offset = end


def validate_chain(
    source: Union["BlockStore", str, Path, bytes], cluster: ClusterConfig
) -> Optional[ChainViolation]:
    """Walks a persisted chain from genesis to tip, re-verifying every link,
    transaction root, transaction encoding and vote quorum.

    Parameters:
        source: a block store, the path of a block log or its contents
        cluster: the configuration whose members' keys sign the blocks

    Returns:
        the first violation found, or ``None`` if the chain is intact
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.is_dir():
            from .store import LOG_FILE_NAME

            path = path / LOG_FILE_NAME
        data = path.read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.raw_log()

    expected_genesis = genesis_block(cluster.genesis_timestamp)
    prev: Optional[Block] = None
    committed_keys: Set[tuple] = set()
    height = 0

    records = iter_log_records(data)
    while True:
        try:
            item = next(records, None)
        except ParseError as ex:
            return ChainViolation(height, f"unreadable block log: {ex}")
        if item is None:
            break

        _, raw = item
        try:
            entry = CommittedBlock.decode(raw)
        except ParseError as ex:
            return ChainViolation(height, f"malformed block: {ex}")

        if prev is None:
            if entry.block != expected_genesis or entry.votes:
                return ChainViolation(height, "genesis block does not match the cluster")
        else:
            reason = check_block(
                cluster, entry.block, entry.votes, prev, committed_keys
            )
            if reason:
                return ChainViolation(height, reason)
            committed_keys.update(record.key for record in entry.block.records)

        prev = entry.block
        height += 1

    if prev is None:
        return ChainViolation(0, "block log is empty")
    return None
