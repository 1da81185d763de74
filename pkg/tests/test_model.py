import pytest

from veriframe.errors import InvalidPolicyError, ParseError
from veriframe.model import (
    DigestAlgorithm,
    DigestRecord,
    SelectionPolicy,
    StreamHeader,
    WriteMode,
    WriteModeKind,
)
from veriframe.model.stream import HEADER_SIZE

from conftest import golden


STREAM_ID = bytes(range(16))


def test_header_encoding_matches_announce_golden():
    header = StreamHeader(STREAM_ID, 256, 134, frame_count=303)
    encoded = header.encode()

    assert len(encoded) == HEADER_SIZE == 41
    # announce = u32 length + message type + header
    assert golden("stream_announce")[5:] == encoded
    assert StreamHeader.decode(encoded) == header


def test_header_derived_values():
    header = StreamHeader(STREAM_ID, 1920, 1012, channels=3, frame_count=303)
    assert header.pixel_count == 1_943_040
    assert header.frame_size == 3 * 1_943_040
    assert header.total_size == HEADER_SIZE + 303 * header.frame_size
    assert header.duration == pytest.approx(10.1)


@pytest.mark.parametrize(
    "changes, offset",
    [
        ({"width": 0}, 20),
        ({"height": 0}, 24),
        ({"channels": 2}, 28),
        ({"fps_numerator": 0}, 29),
        ({"fps_denominator": 0}, 31),
    ],
)
def test_header_validation_names_offset(changes, offset):
    fields = dict(stream_id=STREAM_ID, width=4, height=4, frame_count=1)
    fields.update(changes)
    with pytest.raises(ParseError) as info:
        StreamHeader(**fields).validate()
    assert info.value.offset == offset


def test_header_decode_rejects_bad_magic_and_truncation():
    encoded = StreamHeader(STREAM_ID, 4, 4, frame_count=1).encode()
    with pytest.raises(ParseError) as info:
        StreamHeader.decode(b"XFV1" + encoded[4:])
    assert info.value.offset == 0

    with pytest.raises(ParseError):
        StreamHeader.decode(encoded[:40])


@pytest.mark.parametrize(
    "spelling, expected",
    [
        ("all", SelectionPolicy.all()),
        ("nth:30", SelectionPolicy.every_nth(30)),
        ("NTH:15", SelectionPolicy.every_nth(15)),
        ("gop", SelectionPolicy.keyframe_only(30)),
        ("gop:12", SelectionPolicy.keyframe_only(12)),
    ],
)
def test_policy_from_string(spelling, expected):
    policy = SelectionPolicy.from_string(spelling)
    assert policy == expected
    assert SelectionPolicy.from_string(str(policy)) == policy


@pytest.mark.parametrize("spelling", ["nth", "nth:0", "nth:x", "all:2", "every"])
def test_invalid_policies(spelling):
    with pytest.raises(InvalidPolicyError):
        SelectionPolicy.from_string(spelling)


def test_keyframe_policy_selects_like_every_nth():
    gop = SelectionPolicy.keyframe_only(10)
    nth = SelectionPolicy.every_nth(10)
    assert [i for i in range(50) if gop.selects(i)] == [
        i for i in range(50) if nth.selects(i)
    ]


@pytest.mark.parametrize(
    "spelling, kind, k",
    [
        ("perframe", WriteModeKind.PER_FRAME, 1),
        ("batchbytes:30", WriteModeKind.BATCH_BYTES, 30),
        ("batchdigests:7", WriteModeKind.BATCH_DIGESTS, 7),
    ],
)
def test_write_mode_from_string(spelling, kind, k):
    mode = WriteMode.from_string(spelling)
    assert (mode.kind, mode.k) == (kind, k)
    assert str(mode) == spelling


@pytest.mark.parametrize("spelling", ["perframe:2", "batchbytes", "batchdigests:0", "x"])
def test_invalid_write_modes(spelling):
    with pytest.raises(InvalidPolicyError):
        WriteMode.from_string(spelling)


def test_algorithm_spellings():
    assert DigestAlgorithm.from_string("SHA-256") is DigestAlgorithm.SHA256
    assert DigestAlgorithm.from_string("md5") is DigestAlgorithm.MD5
    assert DigestAlgorithm.SHA256.digest_size == 32
    with pytest.raises(InvalidPolicyError):
        DigestAlgorithm.from_string("sha1")


def _record(**changes) -> DigestRecord:
    fields = dict(
        stream_id=STREAM_ID,
        mode=WriteMode.per_frame(),
        frame_id_start=5,
        frame_id_end=5,
        algorithm=DigestAlgorithm.MD5,
        digest=bytes.fromhex("d41d8cd98f00b204e9800998ecf8427e"),
    )
    fields.update(changes)
    return DigestRecord(**fields)


def test_digest_record_matches_golden():
    record = _record()
    assert record.encode() == golden("digest_record")

    decoded, end = DigestRecord.decode(golden("digest_record"))
    assert decoded == record
    assert end == 59


def test_digest_record_decode_rejects_invalid_records():
    with pytest.raises(ParseError):
        DigestRecord.decode(golden("digest_record")[:-1])

    bad_range = _record(
        mode=WriteMode.batch_bytes(2), frame_id_start=9, frame_id_end=3
    ).encode()
    with pytest.raises(ParseError):
        DigestRecord.decode(bad_range)

    with pytest.raises(ParseError):
        DigestRecord.decode(_record(digest=bytes(32)).encode())


def test_per_frame_record_must_cover_one_frame():
    with pytest.raises(ValueError):
        _record(frame_id_end=6).validate()


def test_record_covers_and_key():
    record = _record(mode=WriteMode.batch_digests(4), frame_id_start=8, frame_id_end=11)
    assert record.covers(8) and record.covers(11)
    assert not record.covers(12)
    assert record.key == _record(
        mode=WriteMode.batch_digests(4),
        frame_id_start=8,
        frame_id_end=11,
        digest=bytes(16),
    ).key
