"""Rendering and parsing of verification reports.

The machine-readable form is a JSON document with the header fields first,
then a summary and the per-frame verdicts, always in the same order::

    {"stream_id": ..., "policy": ..., "algorithm": ..., "mode": ...,
     "overall": ..., "summary": {...},
     "frames": [{"frame_id": 0, "status": "Authentic", "height": 1,
                 "timestamp": ...}, ...]}
"""

import json

from typing import Any, Dict, List, Tuple

from veriframe.errors import InvalidPolicyError, ParseError
from veriframe.model import DigestAlgorithm, SelectionPolicy, WriteMode
from veriframe.rendering import render_template

from .verify import (
    MatchedRecord,
    Overall,
    Verdict,
    VerdictStatus,
    VerificationReport,
)

__all__ = (
    "exit_code_for",
    "parse_report",
    "render_json",
    "render_report",
    "render_text",
    "report_to_dict",
)


def exit_code_for(report: VerificationReport) -> int:
    """Exit code encoding the overall verdict: 0 authentic, 2 tampered,
    3 incomplete.
    """
    return report.overall.exit_code


def report_to_dict(report: VerificationReport) -> Dict[str, Any]:
    frames: List[Dict[str, Any]] = []
    for verdict in report.verdicts:
        item: Dict[str, Any] = {
            "frame_id": verdict.frame_id,
            "status": verdict.status.value,
        }
        if verdict.matched is not None:
            item["height"] = verdict.matched.height
            item["timestamp"] = verdict.matched.timestamp
        frames.append(item)

    return {
        "stream_id": report.stream_id.hex(),
        "policy": str(report.policy),
        "algorithm": str(report.algorithm),
        "mode": str(report.mode),
        "overall": report.overall.value,
        "summary": {status.value: count for status, count in report.counts.items()},
        "frames": frames,
    }


def render_json(report: VerificationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def parse_report(text: str) -> VerificationReport:
    """Parses the machine-readable form of a report.

    Raises:
        ParseError: if the document is not a valid report
    """
    try:
        obj = json.loads(text)
        mode = WriteMode.from_string(obj["mode"])
        report = VerificationReport(
            stream_id=bytes.fromhex(obj["stream_id"]),
            policy=SelectionPolicy.from_string(obj["policy"]),
            algorithm=DigestAlgorithm.from_string(obj["algorithm"]),
            mode=mode,
        )
        for item in obj["frames"]:
            matched = None
            if "height" in item:
                matched = MatchedRecord(
                    int(item["height"]), int(item["timestamp"]), mode
                )
            report.verdicts.append(
                Verdict(int(item["frame_id"]), VerdictStatus(item["status"]), matched)
            )
    except (KeyError, TypeError, ValueError, InvalidPolicyError) as ex:
        raise ParseError(f"invalid verification report: {ex}") from None

    if obj.get("overall") != report.overall.value:
        raise ParseError("overall verdict does not match the frame verdicts")
    return report


def render_text(report: VerificationReport) -> str:
    """Renders the human-readable form of a report."""
    return render_template(
        "report",
        report=report,
        stream_id=report.stream_id.hex(),
        counts=[(status.value, count) for status, count in report.counts.items()],
        problems=[
            (status.value, report.frames_with(status))
            for status in (
                VerdictStatus.TAMPERED,
                VerdictStatus.FRAME_MISSING,
                VerdictStatus.NOT_ON_LEDGER,
            )
            if report.frames_with(status)
        ],
        overall=report.overall.value,
        authentic=report.overall is Overall.AUTHENTIC,
    )


def render_report(report: VerificationReport) -> Tuple[str, str]:
    """Returns the human-readable and the machine-readable form of a report."""
    return render_text(report), render_json(report)
