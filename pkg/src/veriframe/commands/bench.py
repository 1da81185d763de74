from argparse import ArgumentParser, Namespace
from pathlib import Path

from veriframe.errors import UsageError

from .base import CommandBase

__all__ = ("BenchCommand",)


class BenchCommand(CommandBase):
    help = "time serialization, digesting and the whole pipeline"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "--config",
            metavar="FILE",
            default=None,
            help="benchmark configuration in YAML format; defaults are used "
            "for omitted keys",
        )
        parser.add_argument(
            "-o",
            "--out",
            metavar="FILE",
            default=None,
            help="write one CSV row per cell to FILE",
        )
        parser.add_argument(
            "--check",
            action="store_true",
            default=False,
            help="check the expected trends and exit with 1 if any fails",
        )
        parser.add_argument(
            "--from-csv",
            metavar="FILE",
            default=None,
            help="summarize and check an earlier CSV instead of running",
        )

    def run(self, options: Namespace) -> int:
        from veriframe.bench import (
            BenchConfig,
            compare_trend,
            read_csv,
            render_summary,
            run_bench,
            write_csv,
        )

        if options.from_csv is not None:
            if options.config is not None:
                raise UsageError("--config cannot be used with --from-csv")
            with open(options.from_csv, newline="") as fp:
                rows = read_csv(fp)
        else:
            if options.config is not None and not Path(options.config).is_file():
                raise UsageError(f"cannot open configuration: {options.config}")
            # A configuration file carries its own seed
            if options.config:
                config = BenchConfig.load(options.config)
            else:
                config = BenchConfig(seed=options.seed)
            rows = run_bench(config, log=self.log).rows

        if options.out is not None:
            with open(options.out, "w", newline="") as fp:
                write_csv(rows, fp)
            self.log.info(f"Wrote {len(rows)} rows to {options.out}")

        report = compare_trend(rows) if options.check else None
        print(render_summary(rows, report), end="")
        if report is not None and not report.passed:
            return 1
        return 0
