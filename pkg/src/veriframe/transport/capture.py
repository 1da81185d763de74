"""The capture agent running on the IoT device."""

from dataclasses import dataclass
from logging import Logger
from random import Random
from time import perf_counter
from typing import Iterable, Optional, Set

from veriframe.digest import RecordBuilder
from veriframe.errors import ChannelError
from veriframe.model import (
    DigestAlgorithm,
    DigestRecord,
    Frame,
    SelectionPolicy,
    StreamHeader,
    WriteMode,
)
from veriframe.utils import DummyLogger, ceil_div

from .channels import DigestChannel, FrameChannel
from .wire import (
    MAX_FRAGMENT_PAYLOAD,
    EndOfStream,
    StreamAnnounce,
    fragment_frame,
)

__all__ = (
    "CaptureAgent",
    "CaptureSummary",
    "LossInjector",
    "predict_delivered_frames",
    "run_capture_agent",
)


@dataclass
class CaptureSummary:
    """Counters describing a capture run."""

    frames_sent: int = 0
    """Number of frames handed to the frame channel."""

    datagrams_sent: int = 0
    """Number of datagrams that were actually transmitted."""

    datagrams_dropped: int = 0
    """Number of datagrams discarded by the loss simulation hook."""

    records_sent: int = 0
    """Number of digest records delivered on the digest channel."""

    wall_time: float = 0.0
    """Duration of the run in seconds."""


class LossInjector:
    """Seeded hook deciding which datagrams the sender drops.

    Exactly one random number is drawn per datagram, whatever the drop
    probability, so the decisions can be replayed offline from the seed and
    the fragment counts alone.
    """

    def __init__(self, drop: float, seed: int):
        if not 0.0 <= drop <= 1.0:
            raise ValueError(f"drop probability must be in [0, 1], got {drop}")
        self.drop = drop
        self._rng = Random(seed)

    def should_drop(self) -> bool:
        return self._rng.random() < self.drop


def predict_delivered_frames(header: StreamHeader, drop: float, seed: int) -> Set[int]:
    """Replays the drop decisions of a capture run and returns the ids of the
    frames whose fragments all survive.
    """
    injector = LossInjector(drop, seed)
    fragments = max(ceil_div(header.frame_size, MAX_FRAGMENT_PAYLOAD), 1)
    delivered: Set[int] = set()
    for index in range(header.frame_count):
        lost = [injector.should_drop() for _ in range(fragments)]
        if not any(lost):
            delivered.add(index)
    return delivered


class CaptureAgent:
    """Digests frames before they leave the device and sends them on two
    channels: digest records on the reliable channel, frame fragments on the
    lossy one.
    """

    log: Logger

    def __init__(
        self,
        policy: SelectionPolicy,
        algorithm: DigestAlgorithm,
        mode: WriteMode,
        digest_channel: DigestChannel,
        frame_channel: FrameChannel,
        *,
        drop: float = 0.0,
        seed: int = 0,
    ):
        self.policy = policy
        self.algorithm = algorithm
        self.mode = mode
        self.digest_channel = digest_channel
        self.frame_channel = frame_channel
        self.drop = drop
        self.seed = seed
        self.log = DummyLogger()  # type: ignore

    def use_logger(self, log: Logger) -> None:
        self.log = log

    def run(self, header: StreamHeader, frames: Iterable[Frame]) -> CaptureSummary:
        """Streams the given frames.

        Raises:
            ChannelError: if the digest channel fails; the exception carries
                the partial summary
        """
        summary = CaptureSummary()
        injector = LossInjector(self.drop, self.seed)
        builder = RecordBuilder(header.stream_id, self.algorithm, self.mode)
        frame_channel_failed = False
        started = perf_counter()

        def send_records(records: Iterable[DigestRecord]) -> None:
            for record in records:
                self.digest_channel.send(record)
                summary.records_sent += 1

        try:
            self.digest_channel.send(StreamAnnounce(header))

            for frame in frames:
                records = (
                    builder.feed(frame) if self.policy.selects(frame.index) else []
                )

                for datagram in fragment_frame(
                    header.stream_id, frame.index, frame.pixels
                ):
                    if injector.should_drop():
                        summary.datagrams_dropped += 1
                        continue
                    try:
                        self.frame_channel.send(datagram.encode())
                    except OSError as ex:
                        if not frame_channel_failed:
                            self.log.warning(f"Frame channel failed, continuing: {ex}")
                            frame_channel_failed = True
                        continue
                    summary.datagrams_sent += 1
                summary.frames_sent += 1

                send_records(records)

            send_records(builder.finish())
            self.digest_channel.send(EndOfStream(header.stream_id))
        except ChannelError as ex:
            summary.wall_time = perf_counter() - started
            self.log.error(
                f"Digest channel failed after {summary.records_sent} records: {ex}"
            )
            raise ChannelError(str(ex), summary=summary) from None

        summary.wall_time = perf_counter() - started
        self.log.info(
            f"Captured {summary.frames_sent} frames: {summary.records_sent} records, "
            f"{summary.datagrams_sent} datagrams sent, "
            f"{summary.datagrams_dropped} dropped"
        )
        return summary


def run_capture_agent(
    header: StreamHeader,
    frames: Iterable[Frame],
    policy: SelectionPolicy,
    algorithm: DigestAlgorithm,
    mode: WriteMode,
    digest_channel: DigestChannel,
    frame_channel: FrameChannel,
    *,
    drop: float = 0.0,
    seed: int = 0,
    log: Optional[Logger] = None,
) -> CaptureSummary:
    """Convenience wrapper that runs a `CaptureAgent` over a single stream."""
    agent = CaptureAgent(
        policy,
        algorithm,
        mode,
        digest_channel,
        frame_channel,
        drop=drop,
        seed=seed,
    )
    if log is not None:
        agent.use_logger(log)
    return agent.run(header, frames)
