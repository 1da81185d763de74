"""Timing of frame serialization, digesting and the whole capture, ingest
and commit loop for every cell of a benchmark configuration.
"""

import csv

from dataclasses import dataclass, field
from logging import Logger
from statistics import median
from tempfile import TemporaryDirectory
from time import perf_counter_ns
from typing import Dict, IO, Iterable, List, Optional, Sequence, Tuple

from veriframe.digest import digest_bytes, new_hasher, serialize_frame, timed_digest
from veriframe.errors import InvalidPolicyError, ParseError
from veriframe.frame_io import generate_synthetic_stream, synthetic_stream_id
from veriframe.model import (
    DigestAlgorithm,
    Frame,
    SelectionPolicy,
    StreamHeader,
    WriteMode,
    WriteModeKind,
)
from veriframe.utils import DummyLogger, ceil_div

from .config import BenchConfig, Resolution

__all__ = (
    "BenchResult",
    "BenchRow",
    "BenchRunner",
    "CSV_COLUMNS",
    "read_csv",
    "record_layout",
    "run_bench",
    "write_csv",
)


CSV_COLUMNS = (
    "resolution",
    "width",
    "height",
    "algorithm",
    "mode",
    "policy",
    "frames",
    "reps",
    "median_serialize_us",
    "median_hash_us",
    "median_e2e_us",
    "bytes_hashed",
    "records",
)


@dataclass
class BenchRow:
    """Measurements of a single benchmark cell."""

    resolution: str
    width: int
    height: int
    algorithm: DigestAlgorithm
    mode: WriteMode
    policy: SelectionPolicy
    frames: int
    reps: int

    median_serialize_us: float
    """Median time to serialize one frame."""

    median_hash_us: float
    """Median time to compute the digest of one record."""

    median_e2e_us: Optional[float]
    """Median time of a full capture, ingest and commit run; `None` when
    end-to-end runs were disabled.
    """

    bytes_hashed: int
    """Bytes that went into record-level digests over the whole stream."""

    records: int
    """Number of ledger records produced for the whole stream."""

    spread_serialize_us: float = 0.0
    spread_hash_us: float = 0.0
    spread_e2e_us: float = 0.0
    realtime: Optional[bool] = None
    """Whether the end-to-end run finished within the stream duration."""

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    @property
    def selected_frames(self) -> int:
        return ceil_div(self.frames, self.policy.period)

    @property
    def total_us(self) -> float:
        """Time to process the whole stream: the measured end-to-end median if
        available, otherwise an estimate from the per-frame and per-record
        medians.
        """
        if self.median_e2e_us is not None:
            return self.median_e2e_us
        return (
            self.selected_frames * self.median_serialize_us
            + self.records * self.median_hash_us
        )

    @property
    def cell(self) -> Tuple[str, DigestAlgorithm, WriteMode, SelectionPolicy]:
        return self.resolution, self.algorithm, self.mode, self.policy

    def to_csv_row(self) -> Dict[str, str]:
        return {
            "resolution": self.resolution,
            "width": str(self.width),
            "height": str(self.height),
            "algorithm": str(self.algorithm),
            "mode": str(self.mode),
            "policy": str(self.policy),
            "frames": str(self.frames),
            "reps": str(self.reps),
            "median_serialize_us": f"{self.median_serialize_us:.3f}",
            "median_hash_us": f"{self.median_hash_us:.3f}",
            "median_e2e_us": (
                "" if self.median_e2e_us is None else f"{self.median_e2e_us:.3f}"
            ),
            "bytes_hashed": str(self.bytes_hashed),
            "records": str(self.records),
        }

    @classmethod
    def from_csv_row(cls, row: Dict[str, str]) -> "BenchRow":
        e2e = row["median_e2e_us"].strip()
        return cls(
            resolution=row["resolution"],
            width=int(row["width"]),
            height=int(row["height"]),
            algorithm=DigestAlgorithm.from_string(row["algorithm"]),
            mode=WriteMode.from_string(row["mode"]),
            policy=SelectionPolicy.from_string(row["policy"]),
            frames=int(row["frames"]),
            reps=int(row["reps"]),
            median_serialize_us=float(row["median_serialize_us"]),
            median_hash_us=float(row["median_hash_us"]),
            median_e2e_us=float(e2e) if e2e else None,
            bytes_hashed=int(row["bytes_hashed"]),
            records=int(row["records"]),
        )


@dataclass
class BenchResult:
    """Rows of a benchmark run, one per cell."""

    rows: List[BenchRow] = field(default_factory=list)

    def find(
        self,
        resolution: str,
        algorithm: DigestAlgorithm,
        mode: WriteMode,
        policy: SelectionPolicy,
    ) -> Optional[BenchRow]:
        key = (resolution, algorithm, mode, policy)
        return next((row for row in self.rows if row.cell == key), None)


def record_layout(
    selected: int, mode: WriteMode, algorithm: DigestAlgorithm, frame_size: int
) -> Tuple[int, int]:
    """Returns the number of records and the number of bytes hashed at the
    ledger-write step when `selected` frames of `frame_size` bytes each are
    turned into records.
    """
    if mode.kind is WriteModeKind.PER_FRAME:
        return selected, selected * frame_size
    records = ceil_div(selected, mode.k)
    if mode.kind is WriteModeKind.BATCH_BYTES:
        return records, selected * frame_size
    return records, selected * algorithm.digest_size


def _spread(values: Sequence[float]) -> float:
    return max(values) - min(values) if values else 0.0


def _us(ns: int) -> float:
    return ns / 1000.0


class BenchRunner:
    """Runs every cell of a benchmark configuration sequentially."""

    config: BenchConfig
    log: Logger

    _hash_cache: Dict[Tuple[str, DigestAlgorithm, WriteMode], Tuple[float, float]]
    _serialize_cache: Dict[str, Tuple[float, float]]

    def __init__(self, config: BenchConfig):
        config.validate()
        self.config = config
        self.log = DummyLogger()  # type: ignore
        self._hash_cache = {}
        self._serialize_cache = {}

    def use_logger(self, log: Logger) -> None:
        self.log = log

    def run(self) -> BenchResult:
        result = BenchResult()
        for resolution in self.config.resolutions:
            header, frames = generate_synthetic_stream(
                self.config.header_for(
                    resolution, synthetic_stream_id(self.config.seed)
                ),
                self.config.seed,
            )
            self.log.info(
                f"Benchmarking {resolution.name} ({resolution}, "
                f"{header.frame_size} bytes per frame)"
            )
            for algorithm in self.config.algorithms:
                for mode in self.config.modes:
                    for policy in self.config.policies:
                        row = self._run_cell(
                            resolution, header, frames, algorithm, mode, policy
                        )
                        result.rows.append(row)
        return result

    def _run_cell(
        self,
        resolution: Resolution,
        header: StreamHeader,
        frames: Sequence[Frame],
        algorithm: DigestAlgorithm,
        mode: WriteMode,
        policy: SelectionPolicy,
    ) -> BenchRow:
        selected = [frames[i] for i in range(0, len(frames), policy.period)[: mode.k]]
        records, bytes_hashed = record_layout(
            ceil_div(header.frame_count, policy.period),
            mode,
            algorithm,
            header.frame_size,
        )

        serialize_median, serialize_spread = self._time_serialize(
            resolution, frames
        )
        # Only the batch size actually reached matters for the record hash time
        effective = mode if mode.kind is WriteModeKind.PER_FRAME else WriteMode(
            mode.kind, len(selected)
        )
        hash_median, hash_spread = self._time_record_hash(
            resolution, selected, algorithm, effective
        )

        row = BenchRow(
            resolution=resolution.name,
            width=resolution.width,
            height=resolution.height,
            algorithm=algorithm,
            mode=mode,
            policy=policy,
            frames=header.frame_count,
            reps=self.config.repetitions,
            median_serialize_us=serialize_median,
            median_hash_us=hash_median,
            median_e2e_us=None,
            bytes_hashed=bytes_hashed,
            records=records,
            spread_serialize_us=serialize_spread,
            spread_hash_us=hash_spread,
        )

        if self.config.e2e_repetitions > 0:
            self._time_end_to_end(row, header, frames)

        self.log.debug(
            f"{resolution.name} {algorithm} {mode} {policy}: "
            f"serialize {row.median_serialize_us:.1f} us, "
            f"hash {row.median_hash_us:.1f} us, {records} records"
        )
        return row

    def _time_serialize(
        self, resolution: Resolution, frames: Sequence[Frame]
    ) -> Tuple[float, float]:
        cached = self._serialize_cache.get(resolution.name)
        if cached is None:
            samples = []
            for rep in range(self.config.repetitions):
                frame = frames[rep % len(frames)]
                samples.append(
                    _us(timed_digest(frame, DigestAlgorithm.MD5).serialize_ns)
                )
            cached = self._serialize_cache[resolution.name] = (
                median(samples),
                _spread(samples),
            )
        return cached

    def _time_record_hash(
        self,
        resolution: Resolution,
        batch: Sequence[Frame],
        algorithm: DigestAlgorithm,
        mode: WriteMode,
    ) -> Tuple[float, float]:
        key = (resolution.name, algorithm, mode)
        cached = self._hash_cache.get(key)
        if cached is not None:
            return cached

        data = [serialize_frame(frame) for frame in batch]
        samples = []
        for rep in range(self.config.repetitions):
            if mode.kind is WriteModeKind.PER_FRAME:
                chunk = data[rep % len(data)]
                started = perf_counter_ns()
                digest_bytes(algorithm, chunk)
            elif mode.kind is WriteModeKind.BATCH_BYTES:
                started = perf_counter_ns()
                hasher = new_hasher(algorithm)
                for chunk in data:
                    hasher.update(chunk)
                hasher.digest()
            else:
                started = perf_counter_ns()
                joined = b"".join(digest_bytes(algorithm, chunk) for chunk in data)
                digest_bytes(algorithm, joined)
            samples.append(_us(max(perf_counter_ns() - started, 1)))

        cached = self._hash_cache[key] = (median(samples), _spread(samples))
        return cached

    def _time_end_to_end(
        self, row: BenchRow, header: StreamHeader, frames: Sequence[Frame]
    ) -> None:
        from veriframe.ledger.local import InProcessCluster
        from veriframe.pipeline import run_pipeline

        samples = []
        for _ in range(self.config.e2e_repetitions):
            cluster = InProcessCluster.bootstrap(3, seed=self.config.seed)
            with TemporaryDirectory(prefix="veriframe-bench-") as archive_dir:
                started = perf_counter_ns()
                outcome = run_pipeline(
                    header,
                    frames,
                    cluster,
                    archive_dir,
                    policy=row.policy,
                    algorithm=row.algorithm,
                    mode=row.mode,
                    seed=self.config.seed,
                )
                samples.append(_us(perf_counter_ns() - started))

            if outcome.ingest.records_committed != row.records:
                self.log.warning(
                    f"{row.resolution} {row.algorithm} {row.mode} {row.policy}: "
                    f"expected {row.records} records to be committed, got "
                    f"{outcome.ingest.records_committed}"
                )

        row.median_e2e_us = median(samples)
        row.spread_e2e_us = _spread(samples)
        row.realtime = row.median_e2e_us <= header.duration * 1e6
        self.log.info(
            f"{row.resolution} {row.algorithm} {row.mode} {row.policy}: "
            f"pipeline took {row.median_e2e_us / 1000:.1f} ms for "
            f"{header.duration:.1f} s of video "
            f"({'real-time' if row.realtime else 'slower than real-time'})"
        )


def run_bench(config: BenchConfig, *, log: Optional[Logger] = None) -> BenchResult:
    """Runs a benchmark and returns one row per cell of the configuration.

    Raises:
        ConfigurationError: if the configuration is invalid
        LedgerError: if the embedded cluster used for end-to-end runs fails
    """
    runner = BenchRunner(config)
    if log is not None:
        runner.use_logger(log)
    return runner.run()


def write_csv(rows: Iterable[BenchRow], fp: IO[str]) -> None:
    writer = csv.DictWriter(fp, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_csv_row())


def read_csv(fp: IO[str]) -> List[BenchRow]:
    """Parses rows written by `write_csv()`.

    Raises:
        ParseError: if a column is missing or a value cannot be parsed
    """
    reader = csv.DictReader(fp)
    missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or ())]
    if missing:
        raise ParseError(f"missing CSV columns: {', '.join(missing)}")

    rows = []
    for line_no, raw in enumerate(reader, 2):
        try:
            rows.append(BenchRow.from_csv_row(raw))
        except (AttributeError, TypeError, ValueError, InvalidPolicyError) as ex:
            raise ParseError(f"invalid bench row on line {line_no}: {ex}") from None
    return rows
