import pytest

from veriframe.errors import TamperError
from veriframe.frame_io import load_stream, write_stream
from veriframe.verifier import Mutation, tamper_archive


@pytest.fixture
def archive(small_stream, tmp_path):
    header, frames = small_stream
    path = tmp_path / "original.sfv"
    with path.open("wb") as fp:
        write_stream(header, frames, fp)
    return path


def changed_frames(original, tampered):
    _, before = load_stream(original)
    _, after = load_stream(tampered)
    return [a.index for a, b in zip(before, after) if a.pixels != b.pixels]


@pytest.mark.parametrize("mutation", list(Mutation))
def test_exactly_the_named_frames_change(archive, tmp_path, mutation):
    target = tmp_path / "tampered.sfv"
    regions = tamper_archive(archive, target, [9, 0, 4, 4], mutation, seed=3)

    assert changed_frames(archive, target) == [0, 4, 9]
    assert [region.frame_id for region in regions] == [0, 4, 9]
    expected_length = 1 if mutation is Mutation.BYTE_FLIP else 16
    assert {region.length for region in regions} == {expected_length}
    assert target.stat().st_size == archive.stat().st_size


def test_byte_flip_inverts_one_byte(archive, tmp_path):
    target = tmp_path / "tampered.sfv"
    (region,) = tamper_archive(archive, target, [3])

    _, before = load_stream(archive)
    _, after = load_stream(target)
    old = before[3].pixels[region.offset]
    new = after[3].pixels[region.offset]
    assert old ^ new == 0xFF


def test_tampering_is_reproducible(archive, tmp_path):
    first = tmp_path / "first.sfv"
    second = tmp_path / "second.sfv"
    third = tmp_path / "third.sfv"
    tamper_archive(archive, first, [1, 2], Mutation.REGION_OVERWRITE, seed=8)
    tamper_archive(archive, second, [1, 2], Mutation.REGION_OVERWRITE, seed=8)
    tamper_archive(archive, third, [1, 2], Mutation.REGION_OVERWRITE, seed=9)

    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes() != third.read_bytes()


def test_region_is_clamped_to_the_frame(archive, tmp_path, small_header):
    target = tmp_path / "tampered.sfv"
    (region,) = tamper_archive(
        archive,
        target,
        [0],
        Mutation.REGION_OVERWRITE,
        region_size=10 * small_header.frame_size,
    )
    assert region.offset == 0
    assert region.length == small_header.frame_size


@pytest.mark.parametrize("frame_id", [-1, 12, 1000])
def test_out_of_range_frames(archive, tmp_path, frame_id):
    target = tmp_path / "tampered.sfv"
    with pytest.raises(TamperError):
        tamper_archive(archive, target, [frame_id])
    assert not target.exists()


def test_unknown_mutation():
    assert Mutation.from_string("Region-Overwrite") is Mutation.REGION_OVERWRITE
    with pytest.raises(TamperError):
        Mutation.from_string("blur")
