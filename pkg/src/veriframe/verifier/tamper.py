"""Deterministic tampering of archived streams, for producing test exhibits."""

import shutil

from enum import Enum
from pathlib import Path
from random import Random
from typing import Iterable, List, NamedTuple, Union

from veriframe.errors import TamperError
from veriframe.model import StreamHeader
from veriframe.model.stream import HEADER_SIZE

__all__ = ("Mutation", "TamperedRegion", "tamper_archive")


DEFAULT_REGION_SIZE = 16


class Mutation(Enum):
    """Ways of altering the pixels of a frame."""

    BYTE_FLIP = "byte-flip"
    """Inverts every bit of a single byte."""

    REGION_OVERWRITE = "region-overwrite"
    """Overwrites a contiguous run of bytes with random data."""

    @classmethod
    def from_string(cls, value: str) -> "Mutation":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise TamperError(f"unknown mutation: {value!r}") from None


class TamperedRegion(NamedTuple):
    frame_id: int
    offset: int
    """Offset of the region within the frame."""
    length: int


def tamper_archive(
    source: Union[str, Path],
    target: Union[str, Path],
    frame_ids: Iterable[int],
    mutation: Mutation = Mutation.BYTE_FLIP,
    *,
    seed: int = 0,
    region_size: int = DEFAULT_REGION_SIZE,
) -> List[TamperedRegion]:
    """Copies an archive and alters the pixels of exactly the given frames.

    Offsets and replacement bytes are drawn from a generator seeded with
    `seed`, frames being processed in increasing order, so the same arguments
    always produce the same output. Every named frame is guaranteed to
    change.

    Returns:
        the regions that were altered

    Raises:
        TamperError: if a frame id is out of range
    """
    with open(source, "rb") as fp:
        header = StreamHeader.decode(fp.read(HEADER_SIZE))

    ids = sorted(set(frame_ids))
    for frame_id in ids:
        if not 0 <= frame_id < header.frame_count:
            raise TamperError(
                f"frame {frame_id} out of range; stream has {header.frame_count} frames"
            )

    if Path(source).resolve() != Path(target).resolve():
        shutil.copyfile(source, target)

    rng = Random(seed)
    frame_size = header.frame_size
    length = 1 if mutation is Mutation.BYTE_FLIP else min(region_size, frame_size)
    regions: List[TamperedRegion] = []

    with open(target, "r+b") as fp:
        for frame_id in ids:
            offset = rng.randrange(frame_size - length + 1)
            position = HEADER_SIZE + frame_id * frame_size + offset
            fp.seek(position)
            original = fp.read(length)

            if mutation is Mutation.BYTE_FLIP:
                altered = bytes(b ^ 0xFF for b in original)
            else:
                altered = bytes(rng.getrandbits(8) for _ in range(length))
                if altered == original:
                    altered = bytes((altered[0] ^ 0xFF,)) + altered[1:]

            fp.seek(position)
            fp.write(altered)
            regions.append(TamperedRegion(frame_id, offset, length))

    return regions
