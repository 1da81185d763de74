"""A whole cluster running inside one process under the deterministic
scheduler.
"""

from logging import Logger
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Union

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from veriframe.errors import LedgerError
from veriframe.model import DigestRecord
from veriframe.utils import DummyLogger

from .client import ChainInfo, LedgerClient
from .cluster import ClusterConfig, bootstrap_cluster
from .consensus import CommitResult, run_consensus_round
from .faults import Behaviour, node_class_for
from .node import LedgerNode
from .scheduler import FaultScript, LogicalClock, MessageScheduler
from .store import BlockStore, LedgerEntry

__all__ = ("InProcessCluster",)


class InProcessCluster(LedgerClient):
    """Ledger client that owns every node of a cluster.

    Submissions go to one entry node and reach the others through gossip;
    `flush()` runs consensus rounds until the pools are empty.
    """

    cluster: ClusterConfig
    nodes: Dict[int, LedgerNode]
    scheduler: MessageScheduler
    results: List[CommitResult]
    log: Logger

    def __init__(
        self,
        cluster: ClusterConfig,
        keys: Mapping[int, Ed25519PrivateKey],
        *,
        seed: int = 0,
        faults: FaultScript = FaultScript(),
        behaviours: Optional[Mapping[int, Behaviour]] = None,
        clock: Optional[Callable[[], int]] = None,
        directory: Optional[Union[str, Path]] = None,
    ):
        self.cluster = cluster
        self.scheduler = MessageScheduler(seed, faults)
        self.results = []
        self.log = DummyLogger()  # type: ignore
        self._behaviours = dict(behaviours or {})
        clock = clock or LogicalClock(cluster.genesis_timestamp)

        self.nodes = {}
        for member in cluster.members:
            store = BlockStore(
                cluster,
                Path(directory) / member.name if directory is not None else None,
            )
            node_class = node_class_for(self._behaviours.get(member.id))
            self.nodes[member.id] = node_class(
                member.id, cluster, keys[member.id], store, clock=clock
            )

    @classmethod
    def bootstrap(
        cls, n: int = 3, *, seed: int = 0, **kwds
    ) -> "InProcessCluster":
        """Creates a fresh in-memory cluster of `n` members with keys derived
        from `seed`.
        """
        cluster, keys = bootstrap_cluster(n, seed=seed)
        return cls(cluster, keys, seed=seed, **kwds)

    def use_logger(self, log: Logger) -> None:
        self.log = log
        self.scheduler.use_logger(log)
        for node in self.nodes.values():
            node.use_logger(log)

    @property
    def honest_nodes(self) -> List[LedgerNode]:
        return [
            node
            for member_id, node in self.nodes.items()
            if self._behaviours.get(member_id, Behaviour.HONEST) is Behaviour.HONEST
        ]

    @property
    def reference_node(self) -> LedgerNode:
        """The honest node with the longest chain."""
        candidates = self.honest_nodes or list(self.nodes.values())
        return max(candidates, key=lambda node: node.height)

    def submit(self, record: DigestRecord) -> None:
        entry = self.reference_node
        self.scheduler.send_all(entry.member_id, entry.receive_submission(record))
        self.scheduler.run_until_idle(self.nodes)

    def query_digest(self, stream_id: bytes, frame_id: int) -> List[LedgerEntry]:
        return self.reference_node.store.query_digest(stream_id, frame_id)

    def chain_info(self) -> ChainInfo:
        node = self.reference_node
        return ChainInfo(node.height, node.tip.hash, len(node.pending))

    def run_round(self, attempt: int = 0) -> CommitResult:
        result = run_consensus_round(self.nodes, self.scheduler, attempt=attempt)
        self.results.append(result)
        if result.committed:
            self.log.info(
                f"Block {result.height} committed by "
                f"{len(result.committed_by)} of {self.cluster.n} nodes"
            )
        elif result.proposed:
            self.log.warning(
                f"Round {result.height}/{result.attempt} led by "
                f"{result.leader_id} did not commit"
            )
        return result

    def flush(self, timeout: Optional[float] = None) -> None:
        """Runs rounds until no honest node has pending transactions.

        A round that does not commit is retried at the same height with the
        next leader; after every member had a chance to lead without
        success, the cluster is considered stuck.

        Raises:
            LedgerError: if the cluster stops making progress
        """
        attempt = 0
        while any(node.pending for node in self.honest_nodes):
            result = self.run_round(attempt)
            if result.committed:
                attempt = 0
                continue
            attempt += 1
            if attempt >= self.cluster.n:
                raise LedgerError(
                    f"no block committed at height {result.height} after "
                    f"{attempt} attempts"
                )
