"""Trend checks of benchmark results against the shape of the published
per-resolution timings.

Only trends are checked. Absolute times depend on the hardware and are kept
in ``reference_timings.csv`` for side-by-side comparison only.
"""

import csv

from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from veriframe.model import DigestAlgorithm, SelectionPolicy, WriteMode

from .runner import BenchResult, BenchRow

__all__ = (
    "REFERENCE_TIMINGS",
    "ReferenceTiming",
    "TrendCheck",
    "TrendReport",
    "compare_trend",
    "load_reference_timings",
)


REFERENCE_TIMINGS = Path(__file__).parent / "reference_timings.csv"


@dataclass(frozen=True)
class ReferenceTiming:
    """Published conversion and hashing time of one frame at a resolution."""

    resolution: str
    width: int
    height: int
    conversion_ms: float
    hashing_ms: float

    @property
    def pixel_count(self) -> int:
        return self.width * self.height


def load_reference_timings(
    path: Union[str, Path] = REFERENCE_TIMINGS,
) -> List[ReferenceTiming]:
    """Loads reference timings, sorted by pixel count."""
    with open(path, newline="") as fp:
        result = [
            ReferenceTiming(
                resolution=row["resolution"],
                width=int(row["width"]),
                height=int(row["height"]),
                conversion_ms=float(row["conversion_ms"]),
                hashing_ms=float(row["hashing_ms"]),
            )
            for row in csv.DictReader(fp)
        ]
    return sorted(result, key=lambda item: item.pixel_count)


@dataclass
class TrendCheck:
    name: str
    passed: bool
    detail: str = ""

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


@dataclass
class TrendReport:
    checks: List[TrendCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


_ALGORITHMS = (DigestAlgorithm.MD5, DigestAlgorithm.SHA256)
_ALL = SelectionPolicy.all()
_NTH_30 = SelectionPolicy.every_nth(30)
_PER_FRAME = WriteMode.per_frame()


def _find(rows: Sequence[BenchRow], width: int, height: int, *cell) -> Optional[BenchRow]:
    algorithm, mode, policy = cell
    for row in rows:
        if (row.width, row.height) == (width, height) and row.cell[1:] == (
            algorithm,
            mode,
            policy,
        ):
            return row
    return None


def _check_cells(
    rows: Sequence[BenchRow], reference: Sequence[ReferenceTiming]
) -> TrendCheck:
    missing = [
        f"{ref.width}x{ref.height}/{algorithm}/{_PER_FRAME}/{policy}"
        for ref in reference
        for algorithm in _ALGORITHMS
        for policy in (_ALL, _NTH_30)
        if _find(rows, ref.width, ref.height, algorithm, _PER_FRAME, policy) is None
    ]
    if missing:
        return TrendCheck("cells", False, "missing cells: " + ", ".join(missing))
    return TrendCheck("cells", True, f"{len(reference)} resolutions covered")


def _check_monotonic(rows: Sequence[BenchRow]) -> TrendCheck:
    violations = []
    for algorithm in _ALGORITHMS:
        series = sorted(
            (
                row
                for row in rows
                if row.cell[1:] == (algorithm, _PER_FRAME, _ALL)
            ),
            key=lambda row: row.pixel_count,
        )
        for smaller, larger in zip(series, series[1:]):
            before = smaller.median_serialize_us + smaller.median_hash_us
            after = larger.median_serialize_us + larger.median_hash_us
            if after < before:
                violations.append(
                    f"{algorithm}: {smaller.width}x{smaller.height} takes "
                    f"{before:.1f} us but {larger.width}x{larger.height} "
                    f"takes {after:.1f} us"
                )
    if violations:
        return TrendCheck("monotonic", False, "; ".join(violations))
    return TrendCheck(
        "monotonic", True, "serialize+hash time grows with the pixel count"
    )


def _check_algorithms(rows: Sequence[BenchRow]) -> TrendCheck:
    def key(row: BenchRow) -> Tuple:
        return (row.width, row.height, str(row.mode), str(row.policy))

    violations, compared = [], 0
    for _, group in groupby(sorted(rows, key=key), key=key):
        by_algorithm = {row.algorithm: row for row in group}
        md5 = by_algorithm.get(DigestAlgorithm.MD5)
        sha256 = by_algorithm.get(DigestAlgorithm.SHA256)
        if md5 is None or sha256 is None:
            continue
        compared += 1
        if md5.median_hash_us > sha256.median_hash_us:
            violations.append(
                f"{md5.width}x{md5.height}/{md5.mode}/{md5.policy}: md5 "
                f"{md5.median_hash_us:.1f} us > sha256 {sha256.median_hash_us:.1f} us"
            )
    if violations:
        return TrendCheck("md5-vs-sha256", False, "; ".join(violations))
    return TrendCheck(
        "md5-vs-sha256", True, f"md5 is not slower in {compared} cells"
    )


def _check_selection(rows: Sequence[BenchRow]) -> TrendCheck:
    violations, compared = [], 0
    for sparse in rows:
        if sparse.policy != _NTH_30:
            continue
        full = _find(
            rows, sparse.width, sparse.height, sparse.algorithm, sparse.mode, _ALL
        )
        if full is None:
            continue
        compared += 1
        if sparse.total_us > full.total_us:
            violations.append(
                f"{sparse.width}x{sparse.height}/{sparse.algorithm}/{sparse.mode}: "
                f"nth:30 takes {sparse.total_us:.1f} us, all takes "
                f"{full.total_us:.1f} us"
            )
    if violations:
        return TrendCheck("selection", False, "; ".join(violations))
    return TrendCheck(
        "selection", True, f"every 30th frame is not slower in {compared} cells"
    )


def compare_trend(
    result: Union[BenchResult, Iterable[BenchRow]],
    reference: Optional[Sequence[ReferenceTiming]] = None,
) -> TrendReport:
    """Checks that a benchmark result follows the expected trends:

      - serialize+hash time does not decrease as the pixel count grows
      - MD5 is not slower than SHA-256 in any cell
      - selecting every 30th frame is not slower than selecting all of them

    Every reference resolution must be present in the result, otherwise the
    ``cells`` check fails and lists the missing cells.
    """
    rows = list(result.rows if isinstance(result, BenchResult) else result)
    if reference is None:
        reference = load_reference_timings()

    return TrendReport(
        [
            _check_cells(rows, reference),
            _check_monotonic(rows),
            _check_algorithms(rows),
            _check_selection(rows),
        ]
    )
