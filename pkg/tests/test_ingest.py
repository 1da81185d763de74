from queue import Queue
from threading import Thread

import pytest

from veriframe.digest import digest_selected
from veriframe.errors import LedgerError
from veriframe.frame_io import load_stream, write_stream
from veriframe.model import DigestAlgorithm, SelectionPolicy, WriteMode
from veriframe.transport.capture import predict_delivered_frames, run_capture_agent
from veriframe.transport.channels import (
    MemoryDigestChannel,
    MemoryFrameChannel,
    TcpDigestChannel,
    UdpFrameChannel,
)
from veriframe.transport.ingest import (
    DEFAULT_FLUSH_TIMEOUT,
    GapList,
    IngestService,
    archive_paths,
    run_ingest,
)
from veriframe.transport.wire import (
    EndOfStream,
    StreamAnnounce,
    encode_message,
    fragment_frame,
)

from conftest import RecordingLedger


def capture_into(service, stream, *, policy, mode, drop=0.0, seed=0):
    header, frames = stream
    with MemoryDigestChannel(service) as digests, MemoryFrameChannel(
        service
    ) as datagrams:
        run_capture_agent(
            header,
            frames,
            policy,
            DigestAlgorithm.MD5,
            mode,
            digests,
            datagrams,
            drop=drop,
            seed=seed,
        )


def test_clean_stream_is_archived_and_committed(ledger, small_stream, tmp_path):
    header, frames = small_stream
    service = IngestService(ledger, tmp_path, window=0.0, inline=True)
    capture_into(
        service, small_stream, policy=SelectionPolicy.all(), mode=WriteMode.per_frame()
    )
    summary = service.run()

    assert summary.frames_received == 12
    assert summary.records_committed == len(ledger.submitted) == 12
    assert summary.records_discarded == 0
    assert ledger.flushes == 1
    assert ledger.flush_timeouts == [DEFAULT_FLUSH_TIMEOUT]

    archive, gaps = archive_paths(tmp_path, header.stream_id)
    assert summary.archives == [archive]
    expected = tmp_path / "expected.sfv"
    with expected.open("wb") as fp:
        write_stream(header, frames, fp)
    assert archive.read_bytes() == expected.read_bytes()
    assert GapList.load(gaps).missing == []


def test_records_over_missing_frames_are_discarded(ledger, small_stream, tmp_path):
    header, _ = small_stream
    drop, seed = 0.3, 2
    delivered = predict_delivered_frames(header, drop, seed)
    missing = sorted(set(range(12)) - delivered)
    assert missing

    service = IngestService(ledger, tmp_path, window=0.0, inline=True)
    capture_into(
        service,
        small_stream,
        policy=SelectionPolicy.all(),
        mode=WriteMode.batch_bytes(4),
        drop=drop,
        seed=seed,
    )
    summary = service.run()

    for record in ledger.submitted:
        covered = range(record.frame_id_start, record.frame_id_end + 1)
        assert not set(covered) & set(missing)
    assert summary.records_committed + summary.records_discarded == 3

    _, gaps_path = archive_paths(tmp_path, header.stream_id)
    gaps = GapList.load(gaps_path)
    assert gaps.missing == missing
    assert gaps.frame_count == 12

    # missing frames stay zero-filled
    archive_header, archived = load_stream(archive_paths(tmp_path, header.stream_id)[0])
    assert archive_header == header
    assert archived[missing[0]].pixels == bytes(header.frame_size)


def test_frames_before_announce_are_kept(ledger, small_stream, tmp_path):
    header, frames = small_stream
    service = IngestService(ledger, tmp_path, window=0.0, inline=True)
    for datagram in fragment_frame(header.stream_id, 0, frames[0].pixels):
        service.deliver_datagram(datagram.encode())

    records = digest_selected(
        [frames[0]], DigestAlgorithm.MD5, WriteMode.per_frame(), header.stream_id
    )
    for message in [StreamAnnounce(header), records[0], EndOfStream(header.stream_id)]:
        assert service.deliver_digest_payload(encode_message(message))
    service.deliver_digest_closed()
    summary = service.run()

    assert summary.frames_received == 1
    assert ledger.submitted == records


def test_record_before_announce_terminates_connection(ledger, small_stream, tmp_path):
    header, frames = small_stream
    service = IngestService(ledger, tmp_path, window=0.0, inline=True)
    record = digest_selected(
        [frames[0]], DigestAlgorithm.MD5, WriteMode.per_frame(), header.stream_id
    )[0]

    assert not service.deliver_digest_payload(encode_message(record))
    assert not service.deliver_digest_payload(encode_message(StreamAnnounce(header)))
    service.run()
    assert ledger.submitted == []


def test_malformed_datagrams_are_counted(ledger, tmp_path):
    service = IngestService(ledger, tmp_path, window=0.0, inline=True)
    service.deliver_datagram(b"\x00" * 12)
    assert service.summary.datagrams_malformed == 1


def test_queued_events_are_reconciled_by_run(ledger, small_stream, tmp_path):
    header, frames = small_stream
    service = IngestService(ledger, tmp_path, window=0.0)
    records = digest_selected(
        list(frames), DigestAlgorithm.MD5, WriteMode.batch_digests(6), header.stream_id
    )

    assert service.deliver_digest_payload(encode_message(StreamAnnounce(header)))
    for record in records:
        assert service.deliver_digest_payload(encode_message(record))
    assert service.deliver_digest_payload(encode_message(EndOfStream(header.stream_id)))
    # frames arriving after the end-of-stream marker but before reconciliation
    for frame in frames:
        for datagram in fragment_frame(header.stream_id, frame.index, frame.pixels):
            service.deliver_datagram(datagram.encode())
    service.deliver_digest_closed()

    summary = service.run(1, timeout=5.0)
    assert summary.frames_received == 12
    assert ledger.submitted == records


def test_frames_after_reconciliation_are_dropped(ledger, small_stream, tmp_path):
    header, frames = small_stream
    drop, seed = 0.3, 2
    missing = sorted(set(range(12)) - predict_delivered_frames(header, drop, seed))

    service = IngestService(ledger, tmp_path, window=0.0, inline=True)
    capture_into(
        service,
        small_stream,
        policy=SelectionPolicy.all(),
        mode=WriteMode.per_frame(),
        drop=drop,
        seed=seed,
    )
    summary = service.run()
    archive, gaps_path = archive_paths(tmp_path, header.stream_id)
    archived = archive.read_bytes()

    late = fragment_frame(header.stream_id, missing[0], frames[missing[0]].pixels)
    for datagram in late:
        service.deliver_datagram(datagram.encode())

    assert summary.late_arrivals == len(late)
    assert summary.frames_received == 12 - len(missing)
    assert archive.read_bytes() == archived
    assert GapList.load(gaps_path).missing == missing


def test_orphan_frames_are_bounded(ledger, small_stream, tmp_path):
    header, frames = small_stream
    service = IngestService(
        ledger, tmp_path, window=0.0, inline=True, max_orphan_frames=2
    )
    for frame in frames[:3]:
        for datagram in fragment_frame(header.stream_id, frame.index, frame.pixels):
            service.deliver_datagram(datagram.encode())
    assert service.summary.orphans_dropped == 1

    assert service.deliver_digest_payload(encode_message(StreamAnnounce(header)))
    assert service.deliver_digest_payload(
        encode_message(EndOfStream(header.stream_id))
    )
    service.deliver_digest_closed()
    summary = service.run()

    assert summary.frames_received == 2
    _, gaps_path = archive_paths(tmp_path, header.stream_id)
    assert GapList.load(gaps_path).missing == list(range(2, 12))


def test_orphan_bytes_are_bounded(ledger, small_stream, tmp_path):
    header, frames = small_stream
    service = IngestService(
        ledger, tmp_path, window=0.0, inline=True, max_orphan_bytes=header.frame_size
    )
    for frame in frames[:2]:
        for datagram in fragment_frame(header.stream_id, frame.index, frame.pixels):
            service.deliver_datagram(datagram.encode())

    assert service.summary.orphans_dropped == 1


class StalledLedger(RecordingLedger):
    def flush(self, timeout=None):
        super().flush(timeout)
        raise LedgerError("transactions still pending after the timeout")


def test_failed_flush_is_reported(small_stream, tmp_path):
    ledger = StalledLedger()
    service = IngestService(ledger, tmp_path, window=0.0, inline=True)
    capture_into(
        service, small_stream, policy=SelectionPolicy.all(), mode=WriteMode.per_frame()
    )

    with pytest.raises(LedgerError, match="12 digest records were not committed"):
        service.run(timeout=5.0)
    assert service.summary.records_committed == 0
    assert len(ledger.flush_timeouts) == 1
    assert 0.0 <= ledger.flush_timeouts[0] <= 5.0


def test_flush_timeout_must_be_positive(ledger, tmp_path):
    with pytest.raises(ValueError):
        IngestService(ledger, tmp_path, flush_timeout=0)


@pytest.mark.slow
def test_ingest_over_sockets(ledger, small_stream, tmp_path):
    header, frames = small_stream
    addresses = Queue()
    outcome = {}

    def serve():
        outcome["summary"] = run_ingest(
            ("127.0.0.1", 0),
            ("127.0.0.1", 0),
            ledger,
            tmp_path,
            window=1.0,
            timeout=20,
            ready=lambda digests, datagrams: addresses.put((digests, datagrams)),
        )

    thread = Thread(target=serve, daemon=True)
    thread.start()
    digest_address, frame_address = addresses.get(timeout=5)

    with TcpDigestChannel(digest_address) as digests, UdpFrameChannel(
        frame_address
    ) as datagrams:
        run_capture_agent(
            header,
            frames,
            SelectionPolicy.all(),
            DigestAlgorithm.SHA256,
            WriteMode.per_frame(),
            digests,
            datagrams,
        )
    thread.join(timeout=30)

    summary = outcome["summary"]
    assert summary.frames_received == 12
    assert summary.records_committed == 12
    assert len(ledger.submitted) == 12

    archive, _ = archive_paths(tmp_path, header.stream_id)
    assert load_stream(archive) == (header, list(frames))
