"""Benchmarks of frame serialization, digesting and the end-to-end pipeline."""

from typing import Iterable, Optional

from veriframe.rendering import render_template

from .config import BenchConfig, PRESETS, Resolution
from .runner import (
    BenchResult,
    BenchRow,
    BenchRunner,
    CSV_COLUMNS,
    read_csv,
    record_layout,
    run_bench,
    write_csv,
)
from .trend import (
    ReferenceTiming,
    TrendCheck,
    TrendReport,
    compare_trend,
    load_reference_timings,
)

__all__ = (
    "BenchConfig",
    "BenchResult",
    "BenchRow",
    "BenchRunner",
    "CSV_COLUMNS",
    "PRESETS",
    "ReferenceTiming",
    "Resolution",
    "TrendCheck",
    "TrendReport",
    "compare_trend",
    "load_reference_timings",
    "read_csv",
    "record_layout",
    "render_summary",
    "run_bench",
    "write_csv",
)


def render_summary(
    rows: Iterable[BenchRow],
    report: Optional[TrendReport] = None,
    *,
    with_reference: bool = True,
) -> str:
    """Renders a plain-text table of benchmark rows, followed by the
    reference timings and the trend checks if given.
    """
    return render_template(
        "bench",
        rows=list(rows),
        reference=load_reference_timings() if with_reference else [],
        checks=report.checks if report else [],
    )
