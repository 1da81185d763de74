import asyncio
import socket

from contextlib import contextmanager
from dataclasses import replace
from threading import Event, Thread
from time import sleep
from typing import List

import pytest

from veriframe.errors import LedgerError, LedgerUnavailableError
from veriframe.ledger.client import SocketLedgerClient
from veriframe.ledger.cluster import bootstrap_cluster
from veriframe.ledger.node import LedgerNode
from veriframe.ledger.server import NodeServer, PeerLink, read_payload
from veriframe.ledger.store import BlockStore
from veriframe.ledger.validation import validate_chain
from veriframe.utils import DummyLogger

from conftest import make_records


pytestmark = pytest.mark.slow


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@contextmanager
def running_cluster(tmp_path, n: int = 3):
    """Runs every node of a fresh cluster on localhost in a background
    event loop.
    """
    ports = [free_port() for _ in range(n)]
    config, keys = bootstrap_cluster(n)
    config.members = tuple(
        replace(member, address=f"127.0.0.1:{port}")
        for member, port in zip(config.members, ports)
    )
    config.block_interval = 0.1
    config.round_timeout = 1.0

    servers = [
        NodeServer(
            LedgerNode(
                member.id,
                config,
                keys[member.id],
                BlockStore(config, tmp_path / member.name),
            ),
            tick=0.02,
        )
        for member in config.members
    ]

    loop = asyncio.new_event_loop()
    ready = Event()
    stop: List[asyncio.Event] = []

    async def serve_all():
        stop.append(asyncio.Event())
        ready.set()
        await asyncio.gather(*(server.serve(stop[0]) for server in servers))

    thread = Thread(target=loop.run_until_complete, args=(serve_all(),), daemon=True)
    thread.start()
    try:
        ready.wait(5)
        for _ in range(250):
            if all(server.address for server in servers):
                break
            sleep(0.02)
        yield config, ports
    finally:
        loop.call_soon_threadsafe(stop[0].set)
        thread.join(5)
        loop.close()


def test_submit_commit_and_query_over_sockets(tmp_path):
    records = make_records(4, stream=9)
    with running_cluster(tmp_path) as (config, ports):
        with SocketLedgerClient(("127.0.0.1", ports[0])) as client:
            for record in records:
                client.submit(record)
            client.flush(timeout=30)

            info = client.chain_info()
            assert info.height >= 1
            assert info.pending == 0
            entries = client.query_digest(records[2].stream_id, 2)
            assert [entry.record for entry in entries] == [records[2]]

        with SocketLedgerClient(("127.0.0.1", ports[2])) as other:
            for _ in range(50):
                if other.chain_info().height == info.height:
                    break
                sleep(0.1)
            assert other.chain_info().tip_hash == info.tip_hash

    for member in config.members:
        assert validate_chain(tmp_path / member.name, config) is None


def test_invalid_submission_is_reported(tmp_path):
    record = make_records(1)[0]
    bad = type(record)(
        record.stream_id, record.mode, 3, 4, record.algorithm, record.digest
    )
    with running_cluster(tmp_path) as (_, ports):
        with SocketLedgerClient(("127.0.0.1", ports[1])) as client:
            with pytest.raises(LedgerError):
                client.submit(bad)
            assert client.chain_info().pending == 0


def test_unreachable_node():
    client = SocketLedgerClient(("127.0.0.1", free_port()), timeout=1.0)
    with pytest.raises(LedgerUnavailableError):
        client.chain_info()
    assert issubclass(LedgerUnavailableError, LedgerError)


async def deliver_through_link(payloads, expected: int, **kwds):
    received = []
    complete = asyncio.Event()

    async def collect(reader, writer):
        while True:
            payload = await read_payload(reader)
            if payload is None:
                break
            received.append(payload)
            if len(received) == expected:
                complete.set()
        writer.close()

    server = await asyncio.start_server(collect, "127.0.0.1", 0)
    port = server.sockets[0].getsockname()[1]
    link = PeerLink(1, f"127.0.0.1:{port}", DummyLogger(), **kwds)
    try:
        for payload in payloads:
            link.post(payload)
        await asyncio.wait_for(complete.wait(), 5)
        assert link.queued == 0
    finally:
        link.close()
        server.close()
        await server.wait_closed()
    return received


def test_peer_link_sends_in_order():
    payloads = [bytes([index]) * (index + 1) for index in range(50)]
    assert asyncio.run(deliver_through_link(payloads, 50)) == payloads


def test_peer_link_drops_oldest_when_queue_is_full():
    payloads = [bytes([index]) for index in range(5)]
    received = asyncio.run(deliver_through_link(payloads, 3, max_queued=3))
    assert received == payloads[2:]
