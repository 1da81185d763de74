"""Subcommands that set up, run and query the ledger cluster."""

from argparse import ArgumentParser, Namespace
from pathlib import Path

from veriframe.errors import UsageError
from veriframe.ledger.client import LedgerClient

from .base import CommandBase, address_arg

__all__ = ("BootstrapCommand", "LedgerCommand", "LedgerQueryCommand")


class BootstrapCommand(CommandBase):
    help = "create the configuration and keys of a new cluster"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "-n",
            "--members",
            type=int,
            default=3,
            metavar="N",
            help="number of member organizations (at least 3)",
        )
        parser.add_argument(
            "--names",
            metavar="NAMES",
            default=None,
            help="comma-separated member names; defaults to court, police, fire",
        )
        parser.add_argument(
            "-o",
            "--out",
            metavar="DIR",
            required=True,
            help="write cluster.yaml and the keys/ directory into DIR",
        )
        parser.add_argument(
            "--host",
            default="127.0.0.1",
            help="host of the node servers (default: %(default)s)",
        )
        parser.add_argument(
            "--base-port",
            type=int,
            default=7100,
            metavar="PORT",
            help="port of the first node; the others follow (default: %(default)s)",
        )
        parser.add_argument(
            "--leader-selection",
            choices=("round-robin", "random"),
            default="round-robin",
            help="how the leader of a round is chosen (default: %(default)s)",
        )

    def run(self, options: Namespace) -> int:
        from veriframe.ledger.cluster import LeaderSelection, MIN_MEMBERS, bootstrap_cluster

        if options.members < MIN_MEMBERS:
            raise UsageError(
                f"a permissioned cluster needs at least {MIN_MEMBERS} members "
                f"(court, police and fire in the default setup); got "
                f"{options.members}"
            )
        names = None
        if options.names:
            names = [name.strip() for name in options.names.split(",") if name.strip()]
            if len(names) > options.members:
                raise UsageError(
                    f"{len(names)} names given for {options.members} members"
                )

        config, _ = bootstrap_cluster(
            options.members,
            names,
            options.out,
            seed=options.seed,
            host=options.host,
            base_port=options.base_port,
            leader_selection=LeaderSelection.from_string(options.leader_selection),
        )
        self.log.info(
            f"Created a cluster of {config.n} members (quorum {config.quorum}) "
            f"in {options.out}"
        )
        for member in config.members:
            print(f"{member.id}\t{member.name}\t{member.address}\t{member.public_key_hex}")
        return 0


def _resolve_member(config, value: str) -> int:
    for member in config.members:
        if member.name == value or str(member.id) == value:
            return member.id
    raise UsageError(f"no such cluster member: {value!r}")


class LedgerCommand(CommandBase):
    help = "run the ledger node of one cluster member"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "-c",
            "--cluster",
            "--config",
            dest="cluster",
            metavar="FILE",
            required=True,
            help="cluster configuration",
        )
        parser.add_argument(
            "-m",
            "--member",
            "--node-id",
            dest="member",
            required=True,
            help="id or name of the member whose node to run",
        )
        parser.add_argument(
            "-d",
            "--data",
            metavar="DIR",
            default=None,
            help="directory holding the block log and index of the node "
            "(default: data/<member name> next to the cluster configuration)",
        )

    def run(self, options: Namespace) -> int:
        from veriframe.ledger.cluster import ClusterConfig
        from veriframe.ledger.server import run_node_server

        config = ClusterConfig.load(options.cluster)
        member_id = _resolve_member(config, options.member)
        if not config.member(member_id).address:
            raise UsageError(f"member {options.member!r} has no address configured")
        data = options.data
        if data is None:
            data = Path(options.cluster).parent / "data" / config.member(member_id).name

        try:
            run_node_server(config, member_id, data, log=self.log)
        except KeyboardInterrupt:
            self.log.info("Node stopped")
        return 0


def open_ledger(options: Namespace) -> LedgerClient:
    """Opens the ledger named by the ``--ledger`` or ``--snapshot`` options.

    A snapshot is validated against the cluster configuration before it is
    trusted when ``--cluster`` is given.
    """
    from veriframe.ledger.client import SnapshotLedger, SocketLedgerClient

    if options.ledger is not None:
        return SocketLedgerClient(options.ledger)

    if options.snapshot is None:
        raise UsageError("either --ledger or --snapshot is required")
    if not Path(options.snapshot).exists():
        raise UsageError(f"no such snapshot: {options.snapshot}")

    ledger = SnapshotLedger(options.snapshot)
    if options.cluster is not None:
        from veriframe.errors import LedgerError
        from veriframe.ledger.cluster import ClusterConfig
        from veriframe.ledger.validation import validate_chain

        violation = validate_chain(ledger.store, ClusterConfig.load(options.cluster))
        if violation is not None:
            raise LedgerError(
                f"snapshot failed validation at height {violation.height}: "
                f"{violation.reason}"
            )
    return ledger


def add_ledger_arguments(parser: ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--ledger",
        "--addr",
        dest="ledger",
        type=address_arg,
        metavar="HOST:PORT",
        default=None,
        help="query the ledger node listening at HOST:PORT",
    )
    group.add_argument(
        "--snapshot",
        metavar="DIR",
        default=None,
        help="read a copy of the block log of a node from DIR",
    )
    parser.add_argument(
        "-c",
        "--cluster",
        metavar="FILE",
        default=None,
        help="validate the snapshot against this cluster configuration first",
    )


class LedgerQueryCommand(CommandBase):
    help = "look up committed digest records or chain status"

    def add_arguments(self, parser: ArgumentParser) -> None:
        add_ledger_arguments(parser)
        parser.add_argument(
            "--stream", metavar="HEX", default=None, help="stream id (32 hex digits)"
        )
        parser.add_argument(
            "--frame", type=int, metavar="N", default=None, help="frame index"
        )
        parser.add_argument(
            "--info",
            action="store_true",
            default=False,
            help="print the height and tip hash of the chain instead",
        )

    def run(self, options: Namespace) -> int:
        from veriframe.utils import parse_stream_id

        if not options.info:
            if options.stream is None or options.frame is None:
                raise UsageError("--stream and --frame are required unless --info is given")
            if options.frame < 0:
                raise UsageError("frame index must not be negative")
            try:
                stream_id = parse_stream_id(options.stream)
            except ValueError as ex:
                raise UsageError(str(ex)) from None

        with open_ledger(options) as ledger:
            if options.info:
                info = ledger.chain_info()
                print(f"height\t{info.height}")
                print(f"tip\t{info.tip_hash.hex()}")
                print(f"pending\t{info.pending}")
                return 0

            entries = ledger.query_digest(stream_id, options.frame)
            for entry in entries:
                record = entry.record
                print(
                    f"{entry.height}\t{entry.timestamp}\t"
                    f"{record.frame_id_start}-{record.frame_id_end}\t"
                    f"{record.algorithm}\t{record.mode}\t{record.digest.hex()}"
                )
            if not entries:
                self.log.warning("No committed record covers this frame")
                return 3
        return 0
