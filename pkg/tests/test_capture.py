from typing import List

import pytest

from veriframe.errors import ChannelError
from veriframe.model import (
    DigestAlgorithm,
    DigestRecord,
    SelectionPolicy,
    WriteMode,
)
from veriframe.transport.capture import (
    LossInjector,
    predict_delivered_frames,
    run_capture_agent,
)
from veriframe.transport.channels import DigestChannel, FrameChannel
from veriframe.transport.wire import (
    EndOfStream,
    FrameDatagram,
    HashChannelMessage,
    Reassembler,
    StreamAnnounce,
)


class ListDigestChannel(DigestChannel):
    def __init__(self, fail_after: int = -1):
        self.messages: List[HashChannelMessage] = []
        self.fail_after = fail_after

    def send(self, message: HashChannelMessage) -> None:
        if len(self.messages) == self.fail_after:
            raise ChannelError("connection reset")
        self.messages.append(message)


class ListFrameChannel(FrameChannel):
    def __init__(self):
        self.datagrams: List[bytes] = []

    def send(self, datagram: bytes) -> None:
        self.datagrams.append(datagram)


class UnreachableFrameChannel(FrameChannel):
    def send(self, datagram: bytes) -> None:
        raise ConnectionRefusedError("port unreachable")


def capture(stream, channel=None, frames=None, **kwds):
    header, all_frames = stream
    digest_channel = channel or ListDigestChannel()
    frame_channel = frames or ListFrameChannel()
    options = dict(
        policy=SelectionPolicy.every_nth(3),
        algorithm=DigestAlgorithm.SHA256,
        mode=WriteMode.per_frame(),
    )
    options.update(kwds)
    summary = run_capture_agent(
        header,
        all_frames,
        options.pop("policy"),
        options.pop("algorithm"),
        options.pop("mode"),
        digest_channel,
        frame_channel,
        **options,
    )
    return summary, digest_channel, frame_channel


def test_announce_records_end_of_stream_in_order(small_stream):
    header, _ = small_stream
    summary, digests, frames = capture(small_stream)

    messages = digests.messages
    assert messages[0] == StreamAnnounce(header)
    assert messages[-1] == EndOfStream(header.stream_id)
    records = messages[1:-1]
    assert all(isinstance(record, DigestRecord) for record in records)
    assert [record.frame_id_start for record in records] == [0, 3, 6, 9]

    assert summary.records_sent == 4
    assert summary.frames_sent == 12
    assert summary.datagrams_sent == len(frames.datagrams) == 36
    assert summary.datagrams_dropped == 0


def test_partial_batch_is_flushed_at_the_end(small_stream):
    _, digests, _ = capture(
        small_stream,
        policy=SelectionPolicy.all(),
        mode=WriteMode.batch_digests(5),
    )
    ranges = [
        (m.frame_id_start, m.frame_id_end)
        for m in digests.messages
        if isinstance(m, DigestRecord)
    ]
    assert ranges == [(0, 4), (5, 9), (10, 11)]


@pytest.mark.parametrize("drop, seed", [(0.0, 1), (0.2, 3), (0.5, 11), (1.0, 4)])
def test_drop_decisions_are_predictable(small_stream, drop, seed):
    header, _ = small_stream
    summary, _, frames = capture(small_stream, drop=drop, seed=seed)

    reassembler = Reassembler()
    delivered = set()
    for data in frames.datagrams:
        datagram = FrameDatagram.decode(data)
        if reassembler.add(datagram) is not None:
            delivered.add(datagram.frame_id)

    assert delivered == predict_delivered_frames(header, drop, seed)
    assert summary.datagrams_sent + summary.datagrams_dropped == 36


def test_digest_channel_failure_aborts_with_summary(small_stream):
    with pytest.raises(ChannelError) as info:
        capture(small_stream, channel=ListDigestChannel(fail_after=3))

    summary = info.value.summary
    assert summary is not None
    assert summary.records_sent == 2


def test_frame_channel_failure_does_not_stop_digests(small_stream):
    summary, digests, _ = capture(small_stream, frames=UnreachableFrameChannel())
    assert summary.records_sent == 4
    assert summary.datagrams_sent == 0
    assert isinstance(digests.messages[-1], EndOfStream)


def test_loss_injector_range():
    with pytest.raises(ValueError):
        LossInjector(1.5, 0)
    assert not any(LossInjector(0.0, 0).should_drop() for _ in range(100))
    assert all(LossInjector(1.0, 0).should_drop() for _ in range(100))
