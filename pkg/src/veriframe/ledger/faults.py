"""Byzantine node behaviours used to exercise the consensus protocol."""

from enum import Enum
from random import Random
from typing import Optional

from .blocks import Block, BlockHeader, Vote
from .messages import ConsensusMessage, Propose
from .node import LedgerNode, Outgoing, RoundState

__all__ = (
    "Behaviour",
    "EquivocatingNode",
    "GarbageSignerNode",
    "SilentNode",
    "node_class_for",
)


class Behaviour(Enum):
    """How a member of a simulated cluster behaves."""

    HONEST = "honest"
    SILENT = "silent"
    """Signs nothing and sends nothing."""

    GARBAGE = "garbage"
    """Takes part in the protocol but its signatures do not verify."""

    EQUIVOCATE = "equivocate"
    """As leader, proposes different blocks to different validators."""


class SilentNode(LedgerNode):
    """A member that has crashed or refuses to take part."""

    def start_round(self) -> Outgoing:
        return []

    def handle(self, message: ConsensusMessage) -> Outgoing:
        return []

    def close_round(self) -> Outgoing:
        if self._round is not None:
            self._round.closed = True
        return []


class GarbageSignerNode(LedgerNode):
    """A member whose signatures are random bytes."""

    _rng: Random

    def __init__(self, *args, **kwds):
        super().__init__(*args, **kwds)
        self._rng = Random(self.member_id)

    def _sign(self, header_hash: bytes) -> Vote:
        signature = bytes(self._rng.getrandbits(8) for _ in range(64))
        return Vote(self.member_id, header_hash, signature)


class EquivocatingNode(LedgerNode):
    """A member that, when leading, sends one block to the first half of its
    peers and a conflicting block (differing in its timestamp) to the rest.
    """

    def _propose(self, r: RoundState, block: Block) -> Outgoing:
        header = block.header
        twin = Block(
            BlockHeader(
                height=header.height,
                prev_hash=header.prev_hash,
                tx_root=header.tx_root,
                timestamp=header.timestamp + 1,
                leader_id=header.leader_id,
            ),
            block.records,
        )

        out: Outgoing = []
        peers = self.peers
        half = (len(peers) + 1) // 2
        for index, candidate in enumerate((block, twin)):
            header_hash = candidate.header.hash
            vote = self._sign(header_hash)
            r.proposals[header_hash] = candidate
            r.add_copy(vote)
            targets = peers[:half] if index == 0 else peers[half:]
            out.extend(
                (peer, Propose(self.member_id, r.attempt, candidate, vote))
                for peer in targets
            )
        r.signed = block.header.hash
        return out


def node_class_for(behaviour: Optional[Behaviour]) -> type:
    """Returns the node class implementing the given behaviour."""
    if behaviour is None or behaviour is Behaviour.HONEST:
        return LedgerNode
    return {
        Behaviour.SILENT: SilentNode,
        Behaviour.GARBAGE: GarbageSignerNode,
        Behaviour.EQUIVOCATE: EquivocatingNode,
    }[behaviour]
