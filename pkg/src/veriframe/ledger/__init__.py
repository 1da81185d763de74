"""Permissioned ledger replicated by a fixed set of members that commit
blocks of digest records by signed voting.
"""

from .blocks import Block, BlockHeader, CommittedBlock, Vote, genesis_block
from .client import ChainInfo, LedgerClient, SnapshotLedger, SocketLedgerClient
from .cluster import ClusterConfig, LeaderSelection, Member, bootstrap_cluster, quorum
from .consensus import CommitResult, run_consensus_round
from .local import InProcessCluster
from .node import LedgerNode
from .scheduler import FaultScript, LogicalClock, MessageScheduler
from .store import BlockStore, LedgerEntry
from .validation import ChainViolation, validate_chain

__all__ = (
    "Block",
    "BlockHeader",
    "BlockStore",
    "ChainInfo",
    "ChainViolation",
    "ClusterConfig",
    "CommitResult",
    "CommittedBlock",
    "FaultScript",
    "InProcessCluster",
    "LeaderSelection",
    "LedgerClient",
    "LedgerEntry",
    "LedgerNode",
    "LogicalClock",
    "Member",
    "MessageScheduler",
    "SnapshotLedger",
    "SocketLedgerClient",
    "Vote",
    "bootstrap_cluster",
    "genesis_block",
    "quorum",
    "run_consensus_round",
    "validate_chain",
)
