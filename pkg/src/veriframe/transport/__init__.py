from .capture import CaptureAgent, CaptureSummary, run_capture_agent
from .ingest import IngestService, IngestSummary, run_ingest

__all__ = (
    "CaptureAgent",
    "CaptureSummary",
    "IngestService",
    "IngestSummary",
    "run_capture_agent",
    "run_ingest",
)
