"""Socket front-end of a ledger node.

A node listens on the address registered for it in the cluster
configuration. Clients and peers share the port; the first byte of every
payload tells them apart (see `veriframe.ledger.protocol`). Peer messages are
fire-and-forget; client requests get exactly one response each.

The event loop owns the node state machine, so consensus state is only ever
touched from one task at a time.
"""

import asyncio

from collections import deque
from logging import Logger
from pathlib import Path
from struct import Struct
from time import monotonic
from typing import Deque, Dict, Optional, Union

from veriframe.errors import LedgerError, ProtocolError, VeriframeError
from veriframe.utils import DummyLogger, parse_address

from .client import ChainInfo
from .cluster import ClusterConfig
from .messages import decode_consensus_message, encode_consensus_message
from .node import LedgerNode, Outgoing, RoundState
from .protocol import (
    PEER_OPCODES,
    ChainInfoRequest,
    QueryDigestRequest,
    STATUS_OK,
    decode_request,
    encode_chain_info,
    encode_entries,
    error_response,
)
from .store import BlockStore

__all__ = ("NodeServer", "run_node_server")


_LENGTH = Struct("<I")
MAX_PAYLOAD = 1 << 24


async def read_payload(reader: asyncio.StreamReader) -> Optional[bytes]:
    """Reads one length-prefixed payload; returns ``None`` on a clean EOF."""
    try:
        prefix = await reader.readexactly(_LENGTH.size)
    except asyncio.IncompleteReadError as ex:
        if ex.partial:
            raise ProtocolError("connection closed inside a length prefix") from None
        return None
    (length,) = _LENGTH.unpack(prefix)
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {length} bytes exceeds the size limit")
    try:
        return await reader.readexactly(length)
    except asyncio.IncompleteReadError:
        raise ProtocolError("connection closed inside a payload") from None


def _framed(payload: bytes) -> bytes:
    return _LENGTH.pack(len(payload)) + payload


class PeerLink:
    """Outgoing connection to another node, reopened on demand.

    Posted messages are written in order by a single sender task. Messages
    that cannot be delivered are dropped, as is the oldest queued message
    once `max_queued` are waiting; the protocol tolerates lost messages by
    failing the round.
    """

    def __init__(
        self, member_id: int, address: str, log: Logger, *, max_queued: int = 1024
    ):
        self.member_id = member_id
        self.address = parse_address(address)
        self.log = log
        self._writer: Optional[asyncio.StreamWriter] = None
        self._queue: Deque[bytes] = deque(maxlen=max_queued)
        self._sender: Optional["asyncio.Future[None]"] = None

    def post(self, payload: bytes) -> None:
        """Queues a payload and makes sure the sender task is running."""
        if len(self._queue) == self._queue.maxlen:
            self.log.debug(f"Send queue of member {self.member_id} full, dropping")
        self._queue.append(payload)
        if self._sender is None or self._sender.done():
            self._sender = asyncio.ensure_future(self._drain())
            self._sender.add_done_callback(self._sender_done)

    @property
    def queued(self) -> int:
        return len(self._queue)

    async def _drain(self) -> None:
        while self._queue:
            await self.send(self._queue.popleft())

    def _sender_done(self, sender: "asyncio.Future[None]") -> None:
        if not sender.cancelled() and sender.exception() is not None:
            self.log.error(
                f"Sending to member {self.member_id} failed: {sender.exception()!r}"
            )

    async def send(self, payload: bytes) -> None:
        try:
            if self._writer is None or self._writer.is_closing():
                _, self._writer = await asyncio.open_connection(*self.address)
            self._writer.write(_framed(payload))
            await self._writer.drain()
        except OSError as ex:
            self.log.debug(f"Cannot reach member {self.member_id}: {ex}")
            self._close_writer()

    def close(self) -> None:
        if self._sender is not None:
            self._sender.cancel()
            self._sender = None
        self._queue.clear()
        self._close_writer()

    def _close_writer(self) -> None:
        if self._writer is not None:
            self._writer.close()
            self._writer = None


class NodeServer:
    """Runs a `LedgerNode` behind a TCP listener."""

    node: LedgerNode
    log: Logger
    tick: float

    _links: Dict[int, PeerLink]
    _round: Optional[RoundState]
    _round_started: float

    def __init__(self, node: LedgerNode, *, tick: float = 0.05):
        self.node = node
        self.tick = tick
        self.log = DummyLogger()  # type: ignore
        self._links = {}
        self._round = None
        self._round_started = 0.0
        self._server: Optional[asyncio.AbstractServer] = None

    def use_logger(self, log: Logger) -> None:
        self.log = log
        self.node.use_logger(log)

    @property
    def cluster(self) -> ClusterConfig:
        return self.node.cluster

    @property
    def address(self):
        """The address the server actually listens on."""
        if self._server is None or not self._server.sockets:
            return None
        return self._server.sockets[0].getsockname()[:2]

    async def serve(self, stop: Optional[asyncio.Event] = None) -> None:
        """Serves until `stop` is set (or forever if it is not given)."""
        member = self.cluster.member(self.node.member_id)
        if not member.address:
            raise LedgerError(f"member {member.id} has no address configured")
        host, port = parse_address(member.address)

        self._server = await asyncio.start_server(self._handle_connection, host, port)
        self.log.info(
            f"Node {member.id} ({member.name}) listening on {host}:{port}, "
            f"chain height {self.node.height}"
        )

        stop = stop or asyncio.Event()
        ticker = asyncio.ensure_future(self._run_ticker(stop))
        try:
            async with self._server:
                await stop.wait()
        finally:
            ticker.cancel()
            for link in self._links.values():
                link.close()
            self.log.info(f"Node {member.id} stopped")

    async def _handle_connection(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        try:
            while True:
                payload = await read_payload(reader)
                if payload is None:
                    break
                if payload and payload[0] in PEER_OPCODES:
                    self._on_peer_message(payload)
                else:
                    writer.write(_framed(self._serve_request(payload)))
                    await writer.drain()
        except ProtocolError as ex:
            self.log.warning(f"Closing connection: {ex}")
        except (ConnectionError, OSError) as ex:
            self.log.debug(f"Connection lost: {ex}")
        finally:
            writer.close()

    def _on_peer_message(self, payload: bytes) -> None:
        try:
            message = decode_consensus_message(payload)
        except ProtocolError as ex:
            self.log.warning(f"Dropping peer message: {ex}")
            return
        self._dispatch(self.node.handle(message))
        self._track_round()

    def _serve_request(self, payload: bytes) -> bytes:
        try:
            request = decode_request(payload)
        except ProtocolError as ex:
            return error_response(str(ex))

        try:
            if isinstance(request, QueryDigestRequest):
                return encode_entries(
                    self.node.store.query_digest(request.stream_id, request.frame_id)
                )
            elif isinstance(request, ChainInfoRequest):
                return encode_chain_info(
                    ChainInfo(
                        self.node.height, self.node.tip.hash, len(self.node.pending)
                    )
                )
            else:
                self._dispatch(self.node.receive_submission(request))
                return bytes((STATUS_OK,))
        except VeriframeError as ex:
            return error_response(str(ex))

    def _dispatch(self, outgoing: Outgoing) -> None:
        for destination, message in outgoing:
            link = self._links.get(destination)
            if link is None:
                address = self.cluster.member(destination).address
                if not address:
                    continue
                link = self._links[destination] = PeerLink(
                    destination, address, self.log
                )
            link.post(encode_consensus_message(message))

    def _track_round(self) -> None:
        if self.node.round is not self._round:
            self._round = self.node.round
            self._round_started = monotonic()

    async def _run_ticker(self, stop: asyncio.Event) -> None:
        while not stop.is_set():
            await asyncio.sleep(self.tick)
            self._on_tick()

    def _on_tick(self) -> None:
        node = self.node
        self._track_round()
        r = node.round
        now = monotonic()

        if r is None or r.closed:
            if not node.pending:
                return
            attempt = 0
            if r is not None and r.committed is None and r.height == node.height + 1:
                attempt = r.attempt + 1
            node.begin_round(node.height + 1, attempt)
            self._track_round()
            return

        elapsed = now - self._round_started
        if (
            r.leader_id == node.member_id
            and not r.proposals
            and elapsed >= self.cluster.block_interval
        ):
            self._dispatch(node.start_round())

        if elapsed >= self.cluster.round_timeout:
            self._dispatch(node.close_round())
            if r.committed is None:
                self.log.warning(
                    f"Round {r.height}/{r.attempt} timed out without a commit"
                )


def run_node_server(
    config: ClusterConfig,
    member_id: int,
    data_dir: Union[str, Path],
    *,
    log: Optional[Logger] = None,
) -> None:
    """Runs the node of the given member until interrupted."""
    key = config.load_signing_key(member_id)
    store = BlockStore(config, data_dir, log=log)
    node = LedgerNode(member_id, config, key, store)
    server = NodeServer(node)
    if log is not None:
        server.use_logger(log)
    asyncio.run(server.serve())
