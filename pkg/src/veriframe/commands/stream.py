"""Subcommands that produce streams and move them through the two
channels into the ingest service.
"""

from argparse import SUPPRESS, ArgumentParser, Namespace
from pathlib import Path

from veriframe.errors import UsageError
from veriframe.model import DigestAlgorithm, SelectionPolicy, WriteMode

from .base import CommandBase, address_arg, spec_arg

__all__ = ("CaptureCommand", "GenerateCommand", "IngestCommand")


def add_digest_arguments(
    parser: ArgumentParser, algorithm: DigestAlgorithm = DigestAlgorithm.SHA256
) -> None:
    parser.add_argument(
        "--policy",
        type=spec_arg(SelectionPolicy.from_string, "policy"),
        default=SelectionPolicy.all(),
        metavar="POLICY",
        help="frames to digest: all, nth:<n> or gop:<g> (default: all)",
    )
    parser.add_argument(
        "--algo",
        type=spec_arg(DigestAlgorithm.from_string, "algorithm"),
        default=algorithm,
        metavar="ALGO",
        help=f"digest algorithm: md5 or sha256 (default: {algorithm})",
    )
    parser.add_argument(
        "--mode",
        type=spec_arg(WriteMode.from_string, "write mode"),
        default=WriteMode.per_frame(),
        metavar="MODE",
        help="perframe, batchbytes:<k> or batchdigests:<k> (default: perframe)",
    )


def _fps(value: str):
    from argparse import ArgumentTypeError

    numerator, _, denominator = value.partition("/")
    try:
        result = int(numerator), int(denominator or 1)
    except ValueError:
        raise ArgumentTypeError(f"invalid frame rate: {value!r}") from None
    if min(result) < 1:
        raise ArgumentTypeError(f"invalid frame rate: {value!r}")
    return result


class GenerateCommand(CommandBase):
    help = "write a deterministic synthetic stream to an SFV1 file"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--width", type=int, default=256, help="default: %(default)s")
        parser.add_argument("--height", type=int, default=134, help="default: %(default)s")
        parser.add_argument(
            "--channels",
            type=int,
            choices=(1, 3),
            default=1,
            help="1 for grayscale, 3 for RGB (default: %(default)s)",
        )
        parser.add_argument(
            "--frames", type=int, default=303, help="number of frames (default: %(default)s)"
        )
        parser.add_argument(
            "--fps",
            type=_fps,
            default=(30, 1),
            metavar="NUM[/DEN]",
            help="frame rate (default: 30)",
        )
        parser.add_argument("-o", "--out", metavar="FILE", required=True)

    def run(self, options: Namespace) -> int:
        from veriframe.errors import ParseError
        from veriframe.frame_io import (
            generate_synthetic_stream,
            synthetic_stream_id,
            write_stream,
        )
        from veriframe.model import StreamHeader

        header = StreamHeader(
            synthetic_stream_id(options.seed),
            options.width,
            options.height,
            channels=options.channels,
            fps_numerator=options.fps[0],
            fps_denominator=options.fps[1],
            frame_count=options.frames,
        )
        try:
            header.validate()
        except ParseError as ex:
            raise UsageError(f"invalid stream parameters: {ex.msg}") from None

        header, frames = generate_synthetic_stream(header, options.seed)
        with open(options.out, "wb") as fp:
            size = write_stream(header, frames, fp)

        self.log.info(
            f"Wrote {header.frame_count} frames of {header.resolution} "
            f"({size} bytes) to {options.out}"
        )
        print(header.stream_id.hex())
        return 0


class CaptureCommand(CommandBase):
    help = "stream an SFV1 file to an ingest service over both channels"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("-i", "--input", metavar="FILE", required=True)
        parser.add_argument(
            "--hash-addr",
            "--digest-to",
            dest="digest_to",
            type=address_arg,
            required=True,
            metavar="HOST:PORT",
            help="TCP address of the reliable digest channel",
        )
        parser.add_argument(
            "--frame-addr",
            "--frames-to",
            dest="frames_to",
            type=address_arg,
            required=True,
            metavar="HOST:PORT",
            help="UDP address of the frame channel",
        )
        add_digest_arguments(parser)
        parser.add_argument(
            "--drop",
            type=float,
            default=0.0,
            metavar="P",
            help="drop each datagram with probability P, seeded by --seed",
        )
        parser.add_argument(
            "--seed",
            type=int,
            default=SUPPRESS,
            metavar="SEED",
            help="same as the global --seed",
        )

    def run(self, options: Namespace) -> int:
        from veriframe.frame_io import open_stream
        from veriframe.transport.capture import run_capture_agent
        from veriframe.transport.channels import TcpDigestChannel, UdpFrameChannel

        if not 0.0 <= options.drop <= 1.0:
            raise UsageError("drop probability must be between 0 and 1")
        if not Path(options.input).is_file():
            raise UsageError(f"cannot open input file: {options.input}")

        with open_stream(options.input) as (header, frames):
            with TcpDigestChannel(options.digest_to) as digest_channel, UdpFrameChannel(
                options.frames_to
            ) as frame_channel:
                summary = run_capture_agent(
                    header,
                    frames,
                    options.policy,
                    options.algo,
                    options.mode,
                    digest_channel,
                    frame_channel,
                    drop=options.drop,
                    seed=options.seed,
                    log=self.log,
                )

        self.log.info(
            f"Sent {summary.frames_sent} frames in {summary.datagrams_sent} "
            f"datagrams ({summary.datagrams_dropped} dropped) and "
            f"{summary.records_sent} digest records"
        )
        return 0


class IngestCommand(CommandBase):
    help = "receive streams, archive frames and commit their digests"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "--digest-listen",
            type=address_arg,
            default=("127.0.0.1", 7000),
            metavar="HOST:PORT",
            help="TCP address of the digest channel (default: 127.0.0.1:7000)",
        )
        parser.add_argument(
            "--frame-listen",
            type=address_arg,
            default=("127.0.0.1", 7001),
            metavar="HOST:PORT",
            help="UDP address of the frame channel (default: 127.0.0.1:7001)",
        )
        parser.add_argument(
            "--ledger",
            type=address_arg,
            required=True,
            metavar="HOST:PORT",
            help="ledger node to submit digest records to",
        )
        parser.add_argument(
            "-a", "--archive", metavar="DIR", required=True, help="archive directory"
        )
        parser.add_argument(
            "--window",
            type=float,
            default=2.0,
            metavar="SECONDS",
            help="time to wait for late frames after the end of a stream "
            "(default: %(default)s)",
        )
        parser.add_argument(
            "--streams",
            type=int,
            default=1,
            metavar="N",
            help="exit after N streams were reconciled; with 0, exit once every "
            "digest connection has closed (default: %(default)s)",
        )
        parser.add_argument(
            "--timeout",
            type=float,
            default=None,
            metavar="SECONDS",
            help="give up after this many seconds",
        )

    def run(self, options: Namespace) -> int:
        from veriframe.ledger.client import SocketLedgerClient
        from veriframe.transport.ingest import run_ingest

        if options.window < 0:
            raise UsageError("the reconciliation window must not be negative")
        if options.streams < 0:
            raise UsageError("stream count must not be negative")

        Path(options.archive).mkdir(parents=True, exist_ok=True)
        with SocketLedgerClient(options.ledger) as ledger:
            try:
                summary = run_ingest(
                    options.digest_listen,
                    options.frame_listen,
                    ledger,
                    options.archive,
                    window=options.window,
                    streams=options.streams or None,
                    timeout=options.timeout,
                    log=self.log,
                )
            except KeyboardInterrupt:
                self.log.info("Ingest stopped")
                return 0

        self.log.info(
            f"Received {summary.frames_received} frames, committed "
            f"{summary.records_committed} records, discarded "
            f"{summary.records_discarded}"
        )
        return 0
