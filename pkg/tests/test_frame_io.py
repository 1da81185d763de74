from io import BytesIO

import pytest

from veriframe.errors import InvalidFrameError, InvalidPolicyError, ParseError
from veriframe.frame_io import (
    generate_synthetic_stream,
    load_stream,
    read_stream,
    select_frames,
    synthetic_stream_id,
    write_stream,
)
from veriframe.model import Frame, SelectionPolicy, StreamHeader


def test_write_then_read_is_bit_exact(small_stream, tmp_path):
    header, frames = small_stream
    path = tmp_path / "stream.sfv"
    with path.open("wb") as fp:
        written = write_stream(header, frames, fp)

    assert written == header.total_size == path.stat().st_size
    loaded_header, loaded = load_stream(path)
    assert loaded_header == header
    assert [frame.pixels for frame in loaded] == [frame.pixels for frame in frames]
    assert [frame.index for frame in loaded] == list(range(header.frame_count))


def test_one_pixel_stream(tmp_path):
    header = StreamHeader(bytes(16), 1, 1, frame_count=1)
    buf = BytesIO()
    write_stream(header, [Frame(0, b"\x7f")], buf)
    assert len(buf.getvalue()) == 42

    _, frames = read_stream(BytesIO(buf.getvalue()))
    assert list(frames) == [Frame(0, b"\x7f")]


def test_empty_stream_round_trip():
    header = StreamHeader(bytes(16), 8, 8, frame_count=0)
    buf = BytesIO()
    write_stream(header, [], buf)
    decoded, frames = read_stream(BytesIO(buf.getvalue()))
    assert decoded.frame_count == 0
    assert list(frames) == []


def test_truncated_frame_reports_offset(small_stream):
    header, frames = small_stream
    buf = BytesIO()
    write_stream(header, frames, buf)
    data = buf.getvalue()[:-10]

    _, lazy = read_stream(BytesIO(data))
    with pytest.raises(ParseError) as info:
        list(lazy)
    assert info.value.offset == len(data)


def test_write_rejects_wrong_frames(small_header):
    with pytest.raises(InvalidFrameError) as info:
        write_stream(small_header, [Frame(0, b"short")], BytesIO())
    assert info.value.index == 0

    size = small_header.frame_size
    with pytest.raises(InvalidFrameError) as info:
        write_stream(small_header, [Frame(1, bytes(size))], BytesIO())
    assert info.value.index == 1

    with pytest.raises(InvalidFrameError):
        write_stream(small_header, [Frame(0, bytes(size))], BytesIO())


def test_select_frames():
    assert select_frames(SelectionPolicy.all(), 4) == [0, 1, 2, 3]
    assert select_frames(SelectionPolicy.every_nth(30), 303) == list(range(0, 303, 30))
    assert len(select_frames(SelectionPolicy.every_nth(30), 303)) == 11
    assert select_frames(SelectionPolicy.every_nth(5), 0) == []
    with pytest.raises(InvalidPolicyError):
        select_frames(SelectionPolicy.all(), -1)


def test_synthetic_streams_are_deterministic():
    header = StreamHeader(synthetic_stream_id(3), 32, 16, channels=3, frame_count=5)
    _, first = generate_synthetic_stream(header, 3)
    _, second = generate_synthetic_stream(header, 3)
    _, other = generate_synthetic_stream(header, 4)

    assert [f.pixels for f in first] == [f.pixels for f in second]
    assert first[0].pixels != other[0].pixels
    assert first[0].pixels != first[1].pixels
    assert len(first[4].pixels) == header.frame_size
    assert first[-1].index == 4
    assert synthetic_stream_id(3) != synthetic_stream_id(4)

    with pytest.raises(IndexError):
        first[5]
