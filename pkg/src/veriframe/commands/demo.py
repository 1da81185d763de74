from argparse import ArgumentParser, Namespace

from veriframe.model import DigestAlgorithm

from .base import CommandBase, spec_arg
from .stream import add_digest_arguments

__all__ = ("DemoCommand",)


def _scenario(value: str):
    from veriframe.pipeline import Scenario

    return Scenario.from_string(value)


class DemoCommand(CommandBase):
    help = "run capture, ingest, commit and verification in one process"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "scenario",
            nargs="?",
            type=spec_arg(_scenario, "scenario"),
            default="clean",
            metavar="SCENARIO",
            help="clean, tampered:<k> or lossy:<p> (default: clean)",
        )
        parser.add_argument(
            "-o",
            "--out",
            metavar="DIR",
            default="veriframe-demo",
            help="directory for the archive and the reports (default: %(default)s)",
        )
        parser.add_argument("--width", type=int, default=256, help="default: %(default)s")
        parser.add_argument("--height", type=int, default=134, help="default: %(default)s")
        parser.add_argument(
            "--frames", type=int, default=303, help="number of frames (default: %(default)s)"
        )
        add_digest_arguments(parser, DigestAlgorithm.MD5)

    def run(self, options: Namespace) -> int:
        from veriframe.errors import UsageError
        from veriframe.pipeline import demo_pipeline

        if min(options.width, options.height, options.frames) < 1:
            raise UsageError("width, height and frame count must be positive")

        result = demo_pipeline(
            options.scenario,
            options.out,
            seed=options.seed,
            width=options.width,
            height=options.height,
            frames=options.frames,
            policy=options.policy,
            algorithm=options.algo,
            mode=options.mode,
            log=self.log,
        )

        print(result.text_report.read_text(), end="")
        self.log.info(
            f"Scenario {result.scenario}: {result.report.overall.value}; reports "
            f"written to {result.text_report} and {result.json_report}"
        )
        return result.exit_code
