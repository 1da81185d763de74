"""Driving a single consensus round over in-process nodes."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

from .blocks import Block
from .node import LedgerNode
from .scheduler import MessageScheduler

__all__ = ("CommitResult", "run_consensus_round")


@dataclass
class CommitResult:
    """Outcome of a consensus round."""

    height: int
    attempt: int
    leader_id: int

    block: Optional[Block] = None
    """The committed block, or ``None`` if the round did not commit."""

    votes_collected: Dict[int, int] = field(default_factory=dict)
    """Largest number of valid signed copies of a single header seen by each
    node.
    """

    committed_by: Dict[int, bytes] = field(default_factory=dict)
    """Header hash committed by each node that committed."""

    proposed: bool = False
    """Whether the leader had anything to propose."""

    @property
    def committed(self) -> bool:
        return self.block is not None


def run_consensus_round(
    nodes: Mapping[int, LedgerNode],
    scheduler: MessageScheduler,
    *,
    attempt: int = 0,
    height: Optional[int] = None,
) -> CommitResult:
    """Runs one round of the voting protocol.

    The leader proposes, validators sign and relay, and the scheduler
    delivers everything until the network is idle. Validators then close
    the round (which sends their confirmations), and finally the leader
    closes it too.

    Parameters:
        nodes: the nodes taking part, keyed by member id
        scheduler: the network the messages travel on
        attempt: number of earlier failed rounds at this height
        height: height of the round; defaults to one above the highest tip

    Returns:
        the outcome of the round
    """
    if not nodes:
        raise ValueError("no nodes to run a round with")

    cluster = next(iter(nodes.values())).cluster
    if height is None:
        height = max(node.height for node in nodes.values()) + 1
    leader_id = cluster.leader_for(height, attempt)
    result = CommitResult(height=height, attempt=attempt, leader_id=leader_id)

    for node in nodes.values():
        node.begin_round(height, attempt)

    leader = nodes.get(leader_id)
    if leader is not None:
        outgoing = leader.start_round()
        result.proposed = bool(outgoing)
        scheduler.send_all(leader_id, outgoing)
    scheduler.run_until_idle(nodes)

    for member_id, node in nodes.items():
        if member_id != leader_id:
            scheduler.send_all(member_id, node.close_round())
    scheduler.run_until_idle(nodes)

    if leader is not None:
        scheduler.send_all(leader_id, leader.close_round())
        scheduler.run_until_idle(nodes)

    for member_id, node in nodes.items():
        r = node.round
        result.votes_collected[member_id] = r.votes_collected if r else 0
        if r is not None and r.committed is not None:
            result.committed_by[member_id] = r.committed
            if result.block is None:
                result.block = node.store.block_at(height).block

    return result
