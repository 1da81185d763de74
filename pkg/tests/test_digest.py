import hashlib

import pytest

from veriframe.digest import (
    RecordBuilder,
    digest_bytes,
    digest_selected,
    serialize_frame,
    timed_digest,
)
from veriframe.frame_io import generate_synthetic_stream, select_frames
from veriframe.model import (
    DigestAlgorithm,
    Frame,
    SelectionPolicy,
    StreamHeader,
    WriteMode,
    WriteModeKind,
)


@pytest.mark.parametrize(
    "algorithm, data, expected",
    [
        (DigestAlgorithm.MD5, b"", "d41d8cd98f00b204e9800998ecf8427e"),
        (DigestAlgorithm.MD5, b"abc", "900150983cd24fb0d6963f7d28e17f72"),
        (
            DigestAlgorithm.MD5,
            b"The quick brown fox jumps over the lazy dog",
            "9e107d9d372bb6826bd81d3542a419d6",
        ),
        (
            DigestAlgorithm.SHA256,
            b"abc",
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        ),
    ],
)
def test_known_vectors(algorithm, data, expected):
    assert digest_bytes(algorithm, data).hex() == expected


def test_serialization_is_the_raw_pixels():
    frame = Frame(3, bytes(range(12)))
    data = serialize_frame(frame)
    assert data == frame.pixels
    assert isinstance(data, bytes)


def test_timed_digest_reports_both_steps():
    timed = timed_digest(Frame(0, b"abc"), DigestAlgorithm.SHA256)
    assert timed.digest == hashlib.sha256(b"abc").digest()
    assert timed.serialize_ns >= 0
    assert timed.hash_ns >= 0
    assert timed.total_ns == timed.serialize_ns + timed.hash_ns


def test_timed_digest_keeps_zero_readings(monkeypatch):
    readings = iter([1_000, 1_250, 1_250])
    monkeypatch.setattr("veriframe.digest.perf_counter_ns", lambda: next(readings))

    timed = timed_digest(Frame(0, b"abc"), DigestAlgorithm.MD5)
    assert (timed.serialize_ns, timed.hash_ns) == (250, 0)


@pytest.fixture
def stream_303():
    header = StreamHeader(bytes(16), 4, 4, frame_count=303)
    return generate_synthetic_stream(header, 1)


def test_per_frame_records(stream_303):
    header, frames = stream_303
    selected = [frames[i] for i in select_frames(SelectionPolicy.every_nth(30), 303)]
    records = digest_selected(
        selected, DigestAlgorithm.SHA256, WriteMode.per_frame(), header.stream_id
    )

    assert len(records) == 11
    for record, frame in zip(records, selected):
        assert record.frame_id_start == record.frame_id_end == frame.index
        assert record.digest == hashlib.sha256(frame.pixels).digest()
        assert record.mode.kind is WriteModeKind.PER_FRAME


def test_batch_digests_with_partial_tail(stream_303):
    header, frames = stream_303
    builder = RecordBuilder(
        header.stream_id, DigestAlgorithm.MD5, WriteMode.batch_digests(30)
    )
    records = []
    for frame in frames:
        records.extend(builder.feed(frame))
    records.extend(builder.finish())

    assert len(records) == 11
    assert [(r.frame_id_start, r.frame_id_end) for r in records[:2]] == [
        (0, 29),
        (30, 59),
    ]
    assert (records[-1].frame_id_start, records[-1].frame_id_end) == (300, 302)

    joined = b"".join(hashlib.md5(frames[i].pixels).digest() for i in range(30))
    assert records[0].digest == hashlib.md5(joined).digest()
    # ten full batches of 30 digests plus the three-frame tail
    assert builder.bytes_hashed == 10 * 480 + 3 * 16


def test_batch_bytes_digests_concatenated_pixels(stream_303):
    header, frames = stream_303
    selected = [frames[i] for i in select_frames(SelectionPolicy.every_nth(15), 303)]
    records = digest_selected(
        selected, DigestAlgorithm.SHA256, WriteMode.batch_bytes(4), header.stream_id
    )

    assert len(records) == 6
    first = b"".join(frame.pixels for frame in selected[:4])
    assert records[0].digest == hashlib.sha256(first).digest()
    assert (records[0].frame_id_start, records[0].frame_id_end) == (0, 45)
    assert (records[-1].frame_id_start, records[-1].frame_id_end) == (300, 300)


def test_no_frames_no_records():
    assert digest_selected([], DigestAlgorithm.MD5, WriteMode.batch_bytes(3), bytes(16)) == []


def test_builder_rejects_out_of_order_frames():
    builder = RecordBuilder(bytes(16), DigestAlgorithm.MD5, WriteMode.per_frame())
    builder.feed(Frame(4, b"x"))
    with pytest.raises(ValueError):
        builder.feed(Frame(4, b"x"))


def test_record_digest_does_not_depend_on_frame_ids():
    a = digest_selected(
        [Frame(0, b"abc")], DigestAlgorithm.MD5, WriteMode.per_frame(), bytes(16)
    )[0]
    b = digest_selected(
        [Frame(9, b"abc")], DigestAlgorithm.MD5, WriteMode.per_frame(), bytes(16)
    )[0]
    assert a.digest == b.digest
    assert a.frame_id_start != b.frame_id_start
