from .report import (
    exit_code_for,
    parse_report,
    render_json,
    render_report,
    render_text,
    report_to_dict,
)
from .tamper import Mutation, tamper_archive
from .verify import (
    MatchedRecord,
    Overall,
    Verdict,
    VerdictStatus,
    VerificationReport,
    discover_modes,
    verify_stream,
)

__all__ = (
    "MatchedRecord",
    "Mutation",
    "Overall",
    "Verdict",
    "VerdictStatus",
    "VerificationReport",
    "discover_modes",
    "exit_code_for",
    "parse_report",
    "render_json",
    "render_report",
    "render_text",
    "report_to_dict",
    "tamper_archive",
    "verify_stream",
)
