"""State machine of a single ledger node.

A round at height *h* works as follows. The leader of the round assembles a
block from its transaction pool, signs the header hash and sends the block
to every other member (`Propose`). Each validator checks the block against
its own tip, signs it and relays its signed copy to every other member,
leader included (`SignedRelay`). At round close a node commits iff exactly
one header hash has valid signed copies and their number reaches the quorum;
the leader's signature on its proposal counts as one copy. Validators that
commit tell the leader with a `Confirm` carrying the votes they collected.

Nodes never do I/O themselves: every entry point returns the messages to
send as ``(destination, message)`` pairs, so the same code runs under the
deterministic scheduler and inside the socket server.
"""

from dataclasses import dataclass, field
from logging import Logger
from time import time_ns
from typing import Callable, Dict, List, Optional, Tuple

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from veriframe.errors import LedgerError
from veriframe.model import DigestRecord
from veriframe.utils import DummyLogger

from .blocks import Block, Transaction, Vote, assemble_block
from .cluster import ClusterConfig
from .crypto import sign_header
from .messages import Confirm, ConsensusMessage, Gossip, Propose, SignedRelay
from .store import BlockStore
from .validation import check_block_body

__all__ = ("LedgerNode", "Outgoing", "RoundState", "wall_clock_us")


Outgoing = List[Tuple[int, ConsensusMessage]]
"""Messages produced by a node, each with the id of its destination."""


def wall_clock_us() -> int:
    """Returns the current wall-clock time in microseconds since the epoch."""
    return time_ns() // 1000


@dataclass
class RoundState:
    """What a node knows about the round it currently takes part in."""

    height: int
    attempt: int
    leader_id: int

    proposals: Dict[bytes, Block] = field(default_factory=dict)
    """Proposed blocks seen in this round, keyed by header hash."""

    copies: Dict[bytes, Dict[int, Vote]] = field(default_factory=dict)
    """Valid signed copies per header hash, keyed by validator id."""

    signed: Optional[bytes] = None
    """Header hash signed by this node in this round, if any."""

    closed: bool = False
    committed: Optional[bytes] = None

    def add_copy(self, vote: Vote) -> None:
        self.copies.setdefault(vote.block_header_hash, {})[vote.validator_id] = vote

    @property
    def signers(self) -> int:
        """Number of distinct members with a valid copy of any header."""
        return len({member for votes in self.copies.values() for member in votes})

    @property
    def votes_collected(self) -> int:
        """Largest number of valid copies collected for a single header."""
        return max((len(votes) for votes in self.copies.values()), default=0)


class LedgerNode:
    """An honest member of the cluster."""

    member_id: int
    cluster: ClusterConfig
    store: BlockStore
    log: Logger

    _key: Ed25519PrivateKey
    _clock: Callable[[], int]
    _pool: Dict[bytes, Transaction]
    _round: Optional[RoundState]

    def __init__(
        self,
        member_id: int,
        cluster: ClusterConfig,
        signing_key: Ed25519PrivateKey,
        store: Optional[BlockStore] = None,
        *,
        clock: Optional[Callable[[], int]] = None,
    ):
        cluster.member(member_id)
        self.member_id = member_id
        self.cluster = cluster
        self.store = store if store is not None else BlockStore(cluster)
        self.log = DummyLogger()  # type: ignore
        self._key = signing_key
        self._clock = clock or wall_clock_us
        self._pool = {}
        self._round = None

    def use_logger(self, log: Logger) -> None:
        self.log = log

    @property
    def tip(self) -> Block:
        return self.store.tip

    @property
    def height(self) -> int:
        return self.store.height

    @property
    def pending(self) -> List[Transaction]:
        return list(self._pool.values())

    @property
    def round(self) -> Optional[RoundState]:
        return self._round

    @property
    def peers(self) -> List[int]:
        return [member for member in self.cluster.member_ids if member != self.member_id]

    def submit(self, record: DigestRecord) -> bool:
        """Adds a record to the transaction pool.

        Returns:
            whether the record was new; records that are already pending or
            committed are ignored
        """
        try:
            record.validate()
        except ValueError as ex:
            self.log.warning(f"Node {self.member_id}: rejected transaction: {ex}")
            return False

        if record.key in self.store.committed_keys:
            return False
        tx = Transaction(record, self._clock())
        if tx.tx_hash in self._pool:
            return False
        self._pool[tx.tx_hash] = tx
        return True

    def receive_submission(self, record: DigestRecord) -> Outgoing:
        """Handles a transaction submitted by a client: adds it to the pool
        and gossips it to every other member.
        """
        if not self.submit(record):
            return []
        return [(peer, Gossip(self.member_id, record)) for peer in self.peers]

    def begin_round(self, height: Optional[int] = None, attempt: int = 0) -> RoundState:
        """Starts taking part in the given round, dropping any state of the
        previous one.
        """
        if height is None:
            height = self.height + 1
        self._round = RoundState(
            height=height,
            attempt=attempt,
            leader_id=self.cluster.leader_for(height, attempt),
        )
        return self._round

    def start_round(self) -> Outgoing:
        """Proposes a block if this node leads the current round and has
        pending transactions.
        """
        r = self._round
        if r is None or r.closed or r.height != self.height + 1:
            r = self.begin_round()
        if r.leader_id != self.member_id or r.proposals:
            return []

        block = assemble_block(
            self._pool.values(),
            self.tip,
            self.member_id,
            height=r.height,
            timestamp=self._clock(),
            max_txs=self.cluster.max_block_txs,
            committed_keys=self.store.committed_keys,
        )
        if block is None:
            return []

        self.log.debug(
            f"Node {self.member_id}: proposing block {block.height} "
            f"with {len(block.records)} transactions"
        )
        return self._propose(r, block)

    def _propose(self, r: RoundState, block: Block) -> Outgoing:
        header_hash = block.header.hash
        vote = self._sign(header_hash)
        r.proposals[header_hash] = block
        r.signed = header_hash
        r.add_copy(vote)
        return [
            (peer, Propose(self.member_id, r.attempt, block, vote))
            for peer in self.peers
        ]

    def handle(self, message: ConsensusMessage) -> Outgoing:
        """Advances the state machine with a message delivered by a peer."""
        if isinstance(message, Gossip):
            self.submit(message.record)
            return []

        if not self.cluster.has_member(message.sender):
            self.log.warning(f"Node {self.member_id}: message from unknown sender")
            return []

        height = message.height
        r = self._round_for(height, message.attempt)
        if r is None:
            self.log.debug(
                f"Node {self.member_id}: ignoring {type(message).__name__} "
                f"for round {height}/{message.attempt}"
            )
            return []

        if isinstance(message, Propose):
            out = self._on_propose(r, message)
        elif isinstance(message, SignedRelay):
            out = self._on_relay(r, message)
        else:
            out = self._on_confirm(r, message)

        if r.signers >= self.cluster.n:
            out.extend(self.close_round())
        return out

    def _round_for(self, height: int, attempt: int) -> Optional[RoundState]:
        r = self._round
        if r is not None and r.height == height:
            if attempt == r.attempt:
                return None if r.closed else r
            if attempt < r.attempt or r.committed is not None:
                return None
            return self.begin_round(height, attempt)
        if height == self.height + 1:
            return self.begin_round(height, attempt)
        return None

    def _on_propose(self, r: RoundState, message: Propose) -> Outgoing:
        block = message.block
        vote = message.leader_vote
        if message.sender != r.leader_id or block.header.leader_id != message.sender:
            self.log.warning(
                f"Node {self.member_id}: proposal for block {block.height} "
                f"from {message.sender}, who does not lead the round"
            )
            return []
        if vote.validator_id != message.sender or not self.cluster.is_valid_vote(vote):
            self.log.warning(
                f"Node {self.member_id}: rejected vote of leader {message.sender}"
            )
            return []

        header_hash = block.header.hash
        r.proposals.setdefault(header_hash, block)
        r.add_copy(vote)

        if r.signed is not None:
            if r.signed != header_hash:
                self.log.warning(
                    f"Node {self.member_id}: leader {message.sender} proposed "
                    f"two blocks at height {block.height}"
                )
            return []

        reason = check_block_body(
            self.cluster, block, self.tip, self.store.committed_keys
        )
        if reason:
            self.log.warning(
                f"Node {self.member_id}: refusing block {block.height}: {reason}"
            )
            return []

        own = self._sign(header_hash)
        r.signed = header_hash
        r.add_copy(own)
        return [
            (peer, SignedRelay(self.member_id, r.height, r.attempt, own))
            for peer in self.peers
        ]

    def _on_relay(self, r: RoundState, message: SignedRelay) -> Outgoing:
        vote = message.vote
        if vote.validator_id != message.sender or not self.cluster.is_valid_vote(vote):
            self.log.warning(
                f"Node {self.member_id}: rejected signed copy from {message.sender}"
            )
            return []
        r.add_copy(vote)
        return []

    def _on_confirm(self, r: RoundState, message: Confirm) -> Outgoing:
        for vote in message.votes:
            if self.cluster.is_valid_vote(vote):
                r.add_copy(vote)
            else:
                self.log.warning(
                    f"Node {self.member_id}: rejected vote of member "
                    f"{vote.validator_id} confirmed by {message.sender}"
                )
        return []

    def close_round(self) -> Outgoing:
        """Closes the current round and commits its block if exactly one
        header gathered a quorum of valid signed copies.

        Returns:
            the `Confirm` for the leader if this validator committed
        """
        r = self._round
        if r is None or r.closed:
            return []
        r.closed = True

        headers = [header for header, votes in r.copies.items() if votes]
        if not headers:
            return []
        if len(headers) > 1:
            self.log.warning(
                f"Node {self.member_id}: conflicting headers at height {r.height}, "
                f"not committing"
            )
            return []

        header_hash = headers[0]
        votes = sorted(r.copies[header_hash].values(), key=lambda v: v.validator_id)
        block = r.proposals.get(header_hash)
        if len(votes) < self.cluster.quorum:
            self.log.warning(
                f"Node {self.member_id}: block {r.height} got {len(votes)} of "
                f"{self.cluster.quorum} votes needed, not committing"
            )
            return []
        if block is None or r.signed != header_hash:
            self.log.warning(
                f"Node {self.member_id}: quorum reached for block {r.height} "
                f"that this node did not endorse"
            )
            return []

        try:
            self.store.append_block(block, votes)
        except LedgerError as ex:
            self.log.warning(f"Node {self.member_id}: cannot commit: {ex}")
            return []

        r.committed = header_hash
        self._prune_pool()
        self.log.info(
            f"Node {self.member_id}: committed block {block.height} with "
            f"{len(block.records)} transactions and {len(votes)} votes"
        )

        if r.leader_id == self.member_id:
            return []
        return [
            (
                r.leader_id,
                Confirm(self.member_id, r.height, r.attempt, header_hash, tuple(votes)),
            )
        ]

    def _prune_pool(self) -> None:
        committed = self.store.committed_keys
        self._pool = {
            tx_hash: tx
            for tx_hash, tx in self._pool.items()
            if tx.record.key not in committed
        }

    def _sign(self, header_hash: bytes) -> Vote:
        return sign_header(self._key, self.member_id, header_hash)
