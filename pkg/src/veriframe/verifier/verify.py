"""Forensic verification of an archived stream against the ledger."""

from dataclasses import dataclass, field
from enum import Enum
from logging import Logger
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

from veriframe.digest import RecordBuilder
from veriframe.errors import ConfigurationError
from veriframe.frame_io import open_stream
from veriframe.ledger.client import LedgerClient
from veriframe.ledger.store import LedgerEntry
from veriframe.model import (
    DigestAlgorithm,
    DigestRecord,
    Frame,
    SelectionPolicy,
    WriteMode,
)
from veriframe.transport.ingest import GapList
from veriframe.utils import DummyLogger

__all__ = (
    "MatchedRecord",
    "Overall",
    "Verdict",
    "VerdictStatus",
    "VerificationReport",
    "discover_modes",
    "verify_stream",
)


class VerdictStatus(Enum):
    """Outcome of the verification of a single frame."""

    AUTHENTIC = "Authentic"
    TAMPERED = "Tampered"
    NOT_ON_LEDGER = "NotOnLedger"
    FRAME_MISSING = "FrameMissing"
    NOT_COVERED = "NotCovered"


class Overall(Enum):
    """Outcome of the verification of a whole stream."""

    AUTHENTIC = "AUTHENTIC"
    TAMPERED = "TAMPERED"
    INCOMPLETE = "INCOMPLETE"

    @property
    def exit_code(self) -> int:
        return _EXIT_CODES[self]


_EXIT_CODES = {Overall.AUTHENTIC: 0, Overall.TAMPERED: 2, Overall.INCOMPLETE: 3}


@dataclass(frozen=True)
class MatchedRecord:
    """Where the ledger record that a frame was compared against lives."""

    height: int
    timestamp: int
    mode: WriteMode


@dataclass(frozen=True)
class Verdict:
    frame_id: int
    status: VerdictStatus
    matched: Optional[MatchedRecord] = None


@dataclass
class VerificationReport:
    """Per-frame verdicts for one stream under one set of verification
    parameters.
    """

    stream_id: bytes
    policy: SelectionPolicy
    algorithm: DigestAlgorithm
    mode: WriteMode
    verdicts: List[Verdict] = field(default_factory=list)

    @property
    def counts(self) -> Dict[VerdictStatus, int]:
        """Number of frames per verdict status, for every status."""
        result = {status: 0 for status in VerdictStatus}
        for verdict in self.verdicts:
            result[verdict.status] += 1
        return result

    @property
    def overall(self) -> Overall:
        counts = self.counts
        if counts[VerdictStatus.TAMPERED]:
            return Overall.TAMPERED
        if counts[VerdictStatus.NOT_ON_LEDGER] or counts[VerdictStatus.FRAME_MISSING]:
            return Overall.INCOMPLETE
        return Overall.AUTHENTIC

    def frames_with(self, status: VerdictStatus) -> List[int]:
        return [v.frame_id for v in self.verdicts if v.status is status]


def _find_match(
    entries: List[LedgerEntry], recomputed: DigestRecord
) -> Optional[LedgerEntry]:
    for entry in entries:
        record = entry.record
        if (
            record.frame_id_start == recomputed.frame_id_start
            and record.frame_id_end == recomputed.frame_id_end
            and record.algorithm is recomputed.algorithm
            and record.mode == recomputed.mode
        ):
            return entry
    return None


def verify_stream(
    archive: Union[str, Path],
    ledger: LedgerClient,
    policy: SelectionPolicy,
    algorithm: DigestAlgorithm,
    mode: WriteMode,
    *,
    gaps: Optional[Union[str, Path, GapList]] = None,
    log: Optional[Logger] = None,
) -> VerificationReport:
    """Verifies an archived stream frame by frame.

    Selected frames are grouped and digested exactly as at capture time, and
    each group is compared with the matching ledger record. A failed batch
    comparison marks every frame of the batch as tampered.

    Parameters:
        archive: path of the SFV1 archive
        ledger: access to the ledger (live or snapshot)
        policy: the selection policy used at capture time
        algorithm: the digest algorithm used at capture time
        mode: the write mode used at capture time
        gaps: the gap list of the archive (path or loaded)

    Raises:
        ParseError: if the archive cannot be parsed
        LedgerError: if the ledger cannot be queried
    """
    log = log or DummyLogger()  # type: ignore
    gap_list = GapList.load(gaps) if isinstance(gaps, (str, Path)) else gaps

    with open_stream(archive) as (header, frames):
        if gap_list is not None and gap_list.stream_id != header.stream_id:
            raise ConfigurationError("gap list belongs to another stream")
        missing: Set[int] = set(gap_list.missing) if gap_list else set()

        report = VerificationReport(header.stream_id, policy, algorithm, mode)
        builder = RecordBuilder(header.stream_id, algorithm, mode)
        group: List[int] = []
        verdicts: Dict[int, Verdict] = {}

        def judge(records: List[DigestRecord]) -> None:
            for recomputed in records:
                members = [
                    frame_id
                    for frame_id in group
                    if recomputed.frame_id_start <= frame_id <= recomputed.frame_id_end
                ]
                for verdict in _judge_group(
                    ledger, recomputed, members, missing, header.stream_id
                ):
                    verdicts[verdict.frame_id] = verdict
                group.clear()

        frame: Frame
        for frame in frames:
            if not policy.selects(frame.index):
                verdicts[frame.index] = Verdict(frame.index, VerdictStatus.NOT_COVERED)
                continue
            group.append(frame.index)
            judge(builder.feed(frame))
        judge(builder.finish())

    report.verdicts = [verdicts[frame_id] for frame_id in sorted(verdicts)]
    counts = report.counts
    log.info(
        f"Verified {header.frame_count} frames of {header.stream_id.hex()} under "
        f"{policy}/{algorithm}/{mode}: {report.overall.value} ("
        + ", ".join(f"{status.value}={count}" for status, count in counts.items())
        + ")"
    )
    return report


def _judge_group(
    ledger: LedgerClient,
    recomputed: DigestRecord,
    members: List[int],
    missing: Set[int],
    stream_id: bytes,
) -> List[Verdict]:
    entry = _find_match(
        ledger.query_digest(stream_id, recomputed.frame_id_start), recomputed
    )
    absent = [frame_id for frame_id in members if frame_id in missing]

    if entry is None:
        return [
            Verdict(
                frame_id,
                VerdictStatus.FRAME_MISSING
                if frame_id in missing
                else VerdictStatus.NOT_ON_LEDGER,
            )
            for frame_id in members
        ]

    matched = MatchedRecord(entry.height, entry.timestamp, entry.record.mode)
    if absent:
        status = VerdictStatus.FRAME_MISSING
    elif entry.record.digest == recomputed.digest:
        status = VerdictStatus.AUTHENTIC
    else:
        status = VerdictStatus.TAMPERED
    return [Verdict(frame_id, status, matched) for frame_id in members]


def discover_modes(
    ledger: LedgerClient, stream_id: bytes, frame_count: int
) -> List[Tuple[DigestAlgorithm, WriteMode]]:
    """Returns every (algorithm, write mode) combination under which records
    of the stream were committed, in a stable order.
    """
    found: Set[Tuple[DigestAlgorithm, WriteMode]] = set()
    for frame_id in range(frame_count):
        for entry in ledger.query_digest(stream_id, frame_id):
            found.add((entry.record.algorithm, entry.record.mode))
    return sorted(
        found, key=lambda pair: (pair[0].value, int(pair[1].kind), pair[1].k)
    )
