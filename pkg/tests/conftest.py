from pathlib import Path
from typing import List, Optional

import pytest

from veriframe.frame_io import generate_synthetic_stream, synthetic_stream_id
from veriframe.ledger.client import ChainInfo, LedgerClient
from veriframe.ledger.local import InProcessCluster
from veriframe.ledger.store import LedgerEntry
from veriframe.model import (
    DigestAlgorithm,
    DigestRecord,
    StreamHeader,
    WriteMode,
)


GOLDEN_DIR = Path(__file__).parent / "golden"


def golden(name: str) -> bytes:
    """Returns the bytes stored in the hex-encoded golden file with the given
    name.
    """
    return bytes.fromhex((GOLDEN_DIR / f"{name}.hex").read_text().strip())


def make_records(count: int, stream: int = 1) -> List[DigestRecord]:
    """Returns `count` distinct per-frame records of the stream whose id is
    `stream` repeated sixteen times.
    """
    return [
        DigestRecord(
            bytes([stream]) * 16,
            WriteMode.per_frame(),
            index,
            index,
            DigestAlgorithm.SHA256,
            bytes([index % 256]) * 32,
        )
        for index in range(count)
    ]


class RecordingLedger(LedgerClient):
    """Ledger stand-in that commits every submitted record immediately, one
    record per block.
    """

    submitted: List[DigestRecord]

    def __init__(self):
        self.submitted = []
        self.flushes = 0
        self.flush_timeouts: List[Optional[float]] = []

    def submit(self, record: DigestRecord) -> None:
        self.submitted.append(record)

    def query_digest(self, stream_id: bytes, frame_id: int) -> List[LedgerEntry]:
        return [
            LedgerEntry(record, height, 1_000 * height)
            for height, record in enumerate(self.submitted, 1)
            if record.stream_id == stream_id and record.covers(frame_id)
        ]

    def chain_info(self) -> ChainInfo:
        return ChainInfo(len(self.submitted), bytes(32), 0)

    def flush(self, timeout: Optional[float] = None) -> None:
        self.flushes += 1
        self.flush_timeouts.append(timeout)


@pytest.fixture
def ledger() -> RecordingLedger:
    return RecordingLedger()


@pytest.fixture
def small_header() -> StreamHeader:
    """Header of a tiny stream whose frames span three datagrams each."""
    return StreamHeader(synthetic_stream_id(7), 64, 48, frame_count=12)


@pytest.fixture
def small_stream(small_header):
    return generate_synthetic_stream(small_header, 7)


@pytest.fixture
def cluster_factory():
    """Factory creating in-process clusters with deterministic keys."""
    def factory(n: int = 3, *, seed: int = 0, **kwds) -> InProcessCluster:
        return InProcessCluster.bootstrap(n, seed=seed, **kwds)

    return factory
