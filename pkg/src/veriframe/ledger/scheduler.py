"""Deterministic in-process network for running a cluster of nodes.

Messages are encoded with the same codec the socket server uses, queued
with a seeded delay and delivered in virtual-time order. A fault script can
drop messages at random, cut individual links or isolate nodes.
"""

import heapq

from dataclasses import dataclass, field
from logging import Logger
from random import Random
from typing import (
    TYPE_CHECKING,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Tuple,
)

from veriframe.errors import ProtocolError
from veriframe.utils import DummyLogger

from .messages import (
    ConsensusMessage,
    decode_consensus_message,
    encode_consensus_message,
)

if TYPE_CHECKING:
    from .node import LedgerNode

__all__ = ("FaultScript", "LogicalClock", "MessageScheduler")


@dataclass(frozen=True)
class FaultScript:
    """Describes which messages the network loses and how much it delays
    the others.
    """

    drop_probability: float = 0.0
    """Probability of losing any single message."""

    max_delay: int = 0
    """Maximum delay of a message in virtual ticks; delays are drawn
    uniformly from zero to this value.
    """

    cut_links: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)
    """Directed ``(source, destination)`` links that lose every message."""

    isolated: FrozenSet[int] = field(default_factory=frozenset)
    """Nodes that neither send nor receive anything."""

    def drops(self, source: int, destination: int, rng: Random) -> bool:
        # Always draw, so that cutting a link does not shift later decisions.
        unlucky = rng.random() < self.drop_probability
        if source in self.isolated or destination in self.isolated:
            return True
        return unlucky or (source, destination) in self.cut_links


class LogicalClock:
    """Deterministic clock that advances by a fixed step on every reading."""

    def __init__(self, start: int = 0, step: int = 1000):
        self._now = start
        self._step = step

    def __call__(self) -> int:
        self._now += self._step
        return self._now


class MessageScheduler:
    """Seeded message queue delivering to in-process nodes."""

    now: int
    sent: int
    delivered: int
    dropped: int
    log: Logger

    _rng: Random
    _queue: List[Tuple[int, float, int, int, int, bytes]]
    _seq: int

    def __init__(self, seed: int = 0, faults: FaultScript = FaultScript()):
        self.faults = faults
        self.now = 0
        self.sent = 0
        self.delivered = 0
        self.dropped = 0
        self.log = DummyLogger()  # type: ignore
        self._rng = Random(seed)
        self._queue = []
        self._seq = 0

    def use_logger(self, log: Logger) -> None:
        self.log = log

    def send(self, source: int, destination: int, message: ConsensusMessage) -> None:
        self.sent += 1
        if self.faults.drops(source, destination, self._rng):
            self.dropped += 1
            self.log.debug(f"Dropped {type(message).__name__} {source}->{destination}")
            return

        delay = self._rng.randint(0, self.faults.max_delay)
        self._seq += 1
        heapq.heappush(
            self._queue,
            (
                self.now + delay,
                self._rng.random(),
                self._seq,
                source,
                destination,
                encode_consensus_message(message),
            ),
        )

    def send_all(
        self, source: int, outgoing: Iterable[Tuple[int, ConsensusMessage]]
    ) -> None:
        for destination, message in outgoing:
            self.send(source, destination, message)

    @property
    def idle(self) -> bool:
        return not self._queue

    def run_until_idle(
        self, nodes: Mapping[int, "LedgerNode"], *, max_steps: int = 1_000_000
    ) -> int:
        """Delivers queued messages, including the ones sent in response,
        until nothing is left.

        Returns:
            the number of messages delivered
        """
        steps = 0
        while self._queue and steps < max_steps:
            when, _, _, source, destination, payload = heapq.heappop(self._queue)
            self.now = max(self.now, when)
            steps += 1

            node = nodes.get(destination)
            if node is None:
                continue
            try:
                message = decode_consensus_message(payload)
            except ProtocolError as ex:
                self.log.warning(f"Undecodable message {source}->{destination}: {ex}")
                continue

            self.delivered += 1
            self.send_all(destination, node.handle(message))

        return steps
