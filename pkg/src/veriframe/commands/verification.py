"""Subcommands that check archived streams against the ledger and produce
altered copies of them.
"""

from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import List, Optional

from veriframe.errors import UsageError

from .base import CommandBase, spec_arg
from .ledger import add_ledger_arguments, open_ledger
from .stream import add_digest_arguments

__all__ = ("TamperCommand", "VerifyCommand", "parse_frame_list")


def parse_frame_list(value: str) -> List[int]:
    """Parses a comma-separated list of frame indices and inclusive ranges,
    e.g. ``1,5,10-12``.
    """
    result = set()
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        start, sep, end = part.partition("-")
        try:
            if sep:
                first, last = int(start), int(end)
                if first > last:
                    raise ValueError(part)
                result.update(range(first, last + 1))
            else:
                result.add(int(start))
        except ValueError:
            raise UsageError(f"invalid frame list item: {part!r}") from None
    if not result:
        raise UsageError("the frame list is empty")
    return sorted(result)


class VerifyCommand(CommandBase):
    help = "verify an archived stream against the digests on the ledger"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "-a", "--archive", metavar="FILE", required=True, help="archived SFV1 stream"
        )
        parser.add_argument(
            "--gaps",
            metavar="FILE",
            default=None,
            help="gap list written by ingest; by default the one next to the "
            "archive is used if it exists",
        )
        add_ledger_arguments(parser)
        add_digest_arguments(parser)
        parser.add_argument(
            "--json", metavar="FILE", default=None, help="also write the report as JSON"
        )
        parser.add_argument(
            "--discover",
            action="store_true",
            default=False,
            help="verify under every algorithm and write mode committed for "
            "the stream instead of --algo and --mode",
        )

    def run(self, options: Namespace) -> int:
        from veriframe.frame_io import open_stream
        from veriframe.verifier import (
            Overall,
            discover_modes,
            render_json,
            render_text,
            verify_stream,
        )

        archive = Path(options.archive)
        if not archive.is_file():
            raise UsageError(f"cannot open archive: {archive}")

        gaps: Optional[Path] = None
        if options.gaps is not None:
            gaps = Path(options.gaps)
            if not gaps.is_file():
                raise UsageError(f"cannot open gap list: {gaps}")
        elif archive.with_suffix(".gaps.yaml").is_file():
            gaps = archive.with_suffix(".gaps.yaml")
            self.log.info(f"Using gap list {gaps}")

        with open_ledger(options) as ledger:
            pairs = [(options.algo, options.mode)]
            if options.discover:
                with open_stream(archive) as (header, _):
                    found = discover_modes(ledger, header.stream_id, header.frame_count)
                if found:
                    pairs = found
                else:
                    self.log.warning("No records of this stream are on the ledger")

            reports = [
                verify_stream(
                    archive, ledger, options.policy, algorithm, mode, gaps=gaps, log=self.log
                )
                for algorithm, mode in pairs
            ]

        print("\n".join(render_text(report) for report in reports), end="")
        if options.json:
            if len(reports) == 1:
                Path(options.json).write_text(render_json(reports[0]))
            else:
                Path(options.json).write_text(
                    "[\n" + ",\n".join(render_json(r).rstrip() for r in reports) + "\n]\n"
                )

        overall = {report.overall for report in reports}
        for outcome in (Overall.TAMPERED, Overall.INCOMPLETE):
            if outcome in overall:
                return outcome.exit_code
        return Overall.AUTHENTIC.exit_code


class TamperCommand(CommandBase):
    help = "write a copy of an archived stream with some frames altered"

    def add_arguments(self, parser: ArgumentParser) -> None:
        from veriframe.verifier.tamper import DEFAULT_REGION_SIZE, Mutation

        parser.add_argument("-i", "--input", metavar="FILE", required=True)
        parser.add_argument("-o", "--out", metavar="FILE", required=True)
        parser.add_argument(
            "--frames",
            type=spec_arg(parse_frame_list, "frame list"),
            required=True,
            metavar="LIST",
            help="frames to alter, e.g. 1,5,10-12",
        )
        parser.add_argument(
            "--mutation",
            type=spec_arg(Mutation.from_string, "mutation"),
            default=Mutation.BYTE_FLIP,
            metavar="KIND",
            help="byte-flip or region-overwrite (default: byte-flip)",
        )
        parser.add_argument(
            "--region-size",
            type=int,
            default=DEFAULT_REGION_SIZE,
            metavar="BYTES",
            help="length of overwritten regions (default: %(default)s)",
        )

    def run(self, options: Namespace) -> int:
        from veriframe.verifier.tamper import tamper_archive

        if not Path(options.input).is_file():
            raise UsageError(f"cannot open input file: {options.input}")
        if Path(options.input).resolve() == Path(options.out).resolve():
            raise UsageError("the tampered copy must not overwrite the original")
        if options.region_size < 1:
            raise UsageError("region size must be at least 1")

        regions = tamper_archive(
            options.input,
            options.out,
            options.frames,
            options.mutation,
            seed=options.seed,
            region_size=options.region_size,
        )
        for region in regions:
            print(f"{region.frame_id}\t{region.offset}\t{region.length}")
        self.log.info(f"Altered {len(regions)} frames in {options.out}")
        return 0
