"""End-to-end runs of the whole system inside one process: capture, ingest,
commit and, for the demonstration, tampering and verification.
"""

from dataclasses import dataclass, field
from enum import Enum
from logging import Logger
from pathlib import Path
from random import Random
from typing import TYPE_CHECKING, Iterable, List, Optional, Union

from veriframe.errors import PipelineStageError, UsageError, VeriframeError
from veriframe.frame_io import generate_synthetic_stream, synthetic_stream_id
from veriframe.ledger.client import LedgerClient
from veriframe.ledger.local import InProcessCluster
from veriframe.model import (
    DigestAlgorithm,
    Frame,
    SelectionPolicy,
    StreamHeader,
    WriteMode,
)
from veriframe.transport.capture import CaptureSummary, run_capture_agent
from veriframe.transport.channels import MemoryDigestChannel, MemoryFrameChannel
from veriframe.transport.ingest import IngestService, IngestSummary, archive_paths
from veriframe.utils import DummyLogger

if TYPE_CHECKING:
    from veriframe.verifier import VerificationReport

__all__ = (
    "DemoResult",
    "PipelineResult",
    "Scenario",
    "ScenarioKind",
    "demo_pipeline",
    "run_pipeline",
)


@dataclass
class PipelineResult:
    """Outcome of a capture, ingest and commit run."""

    header: StreamHeader
    capture: CaptureSummary
    ingest: IngestSummary
    archive: Path
    gaps: Path


def run_pipeline(
    header: StreamHeader,
    frames: Iterable[Frame],
    ledger: LedgerClient,
    archive_dir: Union[str, Path],
    *,
    policy: SelectionPolicy,
    algorithm: DigestAlgorithm,
    mode: WriteMode,
    drop: float = 0.0,
    seed: int = 0,
    window: float = 0.0,
    log: Optional[Logger] = None,
) -> PipelineResult:
    """Streams a video through in-process channels into an ingest service
    that commits to the given ledger.
    """
    service = IngestService(ledger, archive_dir, window=window, inline=True)
    if log is not None:
        service.use_logger(log)

    with MemoryDigestChannel(service) as digest_channel, MemoryFrameChannel(
        service
    ) as frame_channel:
        capture = run_capture_agent(
            header,
            frames,
            policy,
            algorithm,
            mode,
            digest_channel,
            frame_channel,
            drop=drop,
            seed=seed,
            log=log,
        )

    ingest = service.run()
    archive, gaps = archive_paths(archive_dir, header.stream_id)
    return PipelineResult(header, capture, ingest, archive, gaps)


class ScenarioKind(Enum):
    CLEAN = "clean"
    TAMPERED = "tampered"
    LOSSY = "lossy"


@dataclass(frozen=True)
class Scenario:
    """A demonstration scenario: ``clean``, ``tampered:<k>`` or
    ``lossy:<p>``.
    """

    kind: ScenarioKind = ScenarioKind.CLEAN
    tampered: int = 0
    """Number of frames to tamper with."""
    drop: float = 0.0
    """Datagram drop probability."""

    @classmethod
    def from_string(cls, value: str) -> "Scenario":
        name, sep, param = value.strip().partition(":")
        try:
            kind = ScenarioKind(name.strip().lower())
        except ValueError:
            raise UsageError(f"unknown scenario: {value!r}") from None

        if kind is ScenarioKind.CLEAN:
            if sep:
                raise UsageError("the clean scenario has no parameter")
            return cls()

        try:
            if kind is ScenarioKind.TAMPERED:
                count = int(param) if sep else 1
                if count < 0:
                    raise ValueError(count)
                return cls(kind, tampered=count)
            drop = float(param) if sep else 0.1
            if not 0.0 <= drop <= 1.0:
                raise ValueError(drop)
            return cls(kind, drop=drop)
        except ValueError:
            raise UsageError(f"invalid scenario parameter in {value!r}") from None

    def __str__(self) -> str:
        if self.kind is ScenarioKind.TAMPERED:
            return f"tampered:{self.tampered}"
        if self.kind is ScenarioKind.LOSSY:
            return f"lossy:{self.drop}"
        return "clean"


@dataclass
class DemoResult:
    scenario: Scenario
    exit_code: int
    report: "VerificationReport"
    text_report: Path
    json_report: Path
    tampered_frames: List[int] = field(default_factory=list)
    pipeline: Optional[PipelineResult] = None


def demo_pipeline(
    scenario: Scenario,
    out_dir: Union[str, Path],
    *,
    seed: int = 0,
    width: int = 256,
    height: int = 134,
    frames: int = 303,
    policy: SelectionPolicy = SelectionPolicy.all(),
    algorithm: DigestAlgorithm = DigestAlgorithm.MD5,
    mode: WriteMode = WriteMode.per_frame(),
    log: Optional[Logger] = None,
) -> DemoResult:
    """Boots a three-member in-process cluster, streams a synthetic video
    through capture and ingest, optionally tampers with the archive, and
    verifies it.

    Everything is derived from `seed`, so a scenario always produces the same
    reports.

    Raises:
        PipelineStageError: naming the stage that failed
    """
    from veriframe.verifier import render_json, render_text, verify_stream
    from veriframe.verifier.tamper import Mutation, tamper_archive

    log = log or DummyLogger()  # type: ignore
    out_dir = Path(out_dir)
    stage = "bootstrap"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        cluster = InProcessCluster.bootstrap(3, seed=seed)
        cluster.use_logger(log)

        stage = "generate"
        header, stream = generate_synthetic_stream(
            StreamHeader(
                synthetic_stream_id(seed), width, height, frame_count=frames
            ),
            seed,
        )

        stage = "capture"
        result = run_pipeline(
            header,
            stream,
            cluster,
            out_dir / "archive",
            policy=policy,
            algorithm=algorithm,
            mode=mode,
            drop=scenario.drop,
            seed=seed,
            log=log,
        )

        stage = "tamper"
        archive = result.archive
        tampered: List[int] = []
        if scenario.kind is ScenarioKind.TAMPERED:
            candidates = [
                frame_id
                for frame_id in range(header.frame_count)
                if policy.selects(frame_id)
            ]
            if scenario.tampered > len(candidates):
                raise UsageError(
                    f"cannot tamper with {scenario.tampered} frames; only "
                    f"{len(candidates)} are covered"
                )
            tampered = sorted(Random(seed).sample(candidates, scenario.tampered))
            archive = out_dir / "tampered.sfv"
            tamper_archive(result.archive, archive, tampered, Mutation.BYTE_FLIP, seed=seed)
            log.info(f"Tampered with {len(tampered)} frames")

        stage = "verify"
        report = verify_stream(
            archive, cluster, policy, algorithm, mode, gaps=result.gaps, log=log
        )

        stage = "report"
        text_path = out_dir / "report.txt"
        json_path = out_dir / "report.json"
        text_path.write_text(render_text(report))
        json_path.write_text(render_json(report))
    except VeriframeError as ex:
        raise PipelineStageError(stage, str(ex)) from ex
    except OSError as ex:
        raise PipelineStageError(stage, str(ex)) from ex

    return DemoResult(
        scenario=scenario,
        exit_code=report.overall.exit_code,
        report=report,
        text_report=text_path,
        json_report=json_path,
        tampered_frames=tampered,
        pipeline=result,
    )
