import pytest

from veriframe.__main__ import create_argument_parser, main
from veriframe.bench import BenchRow, write_csv
from veriframe.commands import get_command_names
from veriframe.commands.verification import parse_frame_list
from veriframe.errors import UsageError
from veriframe.frame_io import load_stream
from veriframe.ledger.local import InProcessCluster
from veriframe.model import DigestAlgorithm, SelectionPolicy, WriteMode
from veriframe.pipeline import run_pipeline


def test_every_subcommand_is_registered():
    assert get_command_names() == [
        "bootstrap",
        "generate",
        "capture",
        "ingest",
        "ledger",
        "ledger-query",
        "verify",
        "tamper",
        "bench",
        "demo",
    ]
    options = create_argument_parser().parse_args(["--seed", "4", "demo"])
    assert options.seed == 4
    assert options.log_level == "info"


def test_documented_option_spellings():
    parser = create_argument_parser()

    options = parser.parse_args(
        [
            "capture",
            "--input",
            "video.sfv",
            "--policy",
            "nth:5",
            "--algo",
            "md5",
            "--mode",
            "batchbytes:30",
            "--hash-addr",
            "127.0.0.1:7200",
            "--frame-addr",
            "127.0.0.1:7201",
            "--drop",
            "0.1",
            "--seed",
            "9",
        ]
    )
    assert options.digest_to == ("127.0.0.1", 7200)
    assert options.frames_to == ("127.0.0.1", 7201)
    assert options.policy == SelectionPolicy.every_nth(5)
    assert options.mode == WriteMode.batch_bytes(30)
    assert options.algo == DigestAlgorithm.MD5
    assert options.drop == 0.1
    assert options.seed == 9

    options = parser.parse_args(
        ["--seed", "3", "capture", "-i", "video.sfv"]
        + ["--digest-to", "h:1", "--frames-to", "h:2"]
    )
    assert options.seed == 3
    assert options.digest_to == ("h", 1)

    options = parser.parse_args(["ledger", "--config", "cluster.yaml", "--node-id", "1"])
    assert options.cluster == "cluster.yaml"
    assert options.member == "1"
    assert options.data is None

    options = parser.parse_args(
        ["ledger-query", "--addr", "127.0.0.1:7100", "--stream", "00" * 16, "--frame", "4"]
    )
    assert options.ledger == ("127.0.0.1", 7100)
    assert options.frame == 4


def test_frame_lists():
    assert parse_frame_list("1,5,10-12") == [1, 5, 10, 11, 12]
    assert parse_frame_list("3, 3,2") == [2, 3]
    for value in ("", "5-1", "a", "1-"):
        with pytest.raises(UsageError):
            parse_frame_list(value)


@pytest.fixture
def archived(tmp_path, capsys):
    """A generated stream captured into an archive, with the block logs of
    the cluster that committed its digests under ``tmp_path/nodes``.
    """
    source = tmp_path / "source.sfv"
    assert (
        main(
            [
                "--seed",
                "2",
                "generate",
                "--width",
                "32",
                "--height",
                "16",
                "--frames",
                "10",
                "-o",
                str(source),
            ]
        )
        == 0
    )
    stream_hex = capsys.readouterr().out.strip()

    header, frames = load_stream(source)
    assert header.stream_id.hex() == stream_hex
    assert header.frame_count == 10

    cluster = InProcessCluster.bootstrap(3, seed=0, directory=tmp_path / "nodes")
    result = run_pipeline(
        header,
        frames,
        cluster,
        tmp_path / "archive",
        policy=SelectionPolicy.all(),
        algorithm=DigestAlgorithm.SHA256,
        mode=WriteMode.per_frame(),
    )
    assert result.ingest.records_committed == 10
    return result.archive, tmp_path / "nodes" / "court", stream_hex


def test_verify_and_tamper(archived, tmp_path, capsys):
    archive, snapshot, _ = archived

    assert main(["verify", "-a", str(archive), "--snapshot", str(snapshot)]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "Overall: AUTHENTIC"

    tampered = tmp_path / "tampered.sfv"
    code = main(
        ["tamper", "-i", str(archive), "-o", str(tampered), "--frames", "1,4-5"]
    )
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert [int(line.split("\t")[0]) for line in lines] == [1, 4, 5]

    json_path = tmp_path / "report.json"
    code = main(
        [
            "verify",
            "-a",
            str(tampered),
            "--snapshot",
            str(snapshot),
            "--json",
            str(json_path),
        ]
    )
    assert code == 2
    out = capsys.readouterr().out
    assert "Tampered: 1, 4-5" in out
    assert '"overall": "TAMPERED"' in json_path.read_text()


def test_verify_with_the_wrong_algorithm_is_incomplete(archived, capsys):
    archive, snapshot, _ = archived
    args = ["verify", "-a", str(archive), "--snapshot", str(snapshot), "--algo", "md5"]
    assert main(args) == 3
    capsys.readouterr()

    assert main(args + ["--discover"]) == 0
    assert "sha256" in capsys.readouterr().out


def test_snapshot_is_validated_against_the_cluster(archived, tmp_path, capsys):
    archive, snapshot, _ = archived

    # the same seed recreates the configuration of the cluster
    assert main(["--seed", "0", "bootstrap", "-o", str(tmp_path / "conf")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[1] for line in lines] == ["court", "police", "fire"]
    assert (tmp_path / "conf" / "cluster.yaml").is_file()

    config = str(tmp_path / "conf" / "cluster.yaml")
    args = ["verify", "-a", str(archive), "--snapshot", str(snapshot), "-c", config]
    assert main(args) == 0

    # a different cluster did not sign these blocks
    assert main(["--seed", "1", "bootstrap", "-o", str(tmp_path / "other")]) == 0
    other = str(tmp_path / "other" / "cluster.yaml")
    args = ["verify", "-a", str(archive), "--snapshot", str(snapshot), "-c", other]
    assert main(args) == 1


def test_ledger_query(archived, capsys):
    _, snapshot, stream_hex = archived
    base = ["ledger-query", "--snapshot", str(snapshot)]

    assert main(base + ["--info"]) == 0
    info = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert int(info["height"]) >= 1
    assert len(info["tip"]) == 64

    assert main(base + ["--stream", stream_hex, "--frame", "3"]) == 0
    fields = capsys.readouterr().out.strip().split("\t")
    assert fields[2] == "3-3"
    assert fields[3] == "sha256"

    assert main(base + ["--stream", stream_hex, "--frame", "99"]) == 3


def test_demo(tmp_path, capsys):
    out = tmp_path / "demo"
    args = ["demo", "tampered:2", "-o", str(out), "--width", "32", "--height", "16"]
    assert main(args + ["--frames", "12"]) == 2
    assert capsys.readouterr().out.splitlines()[-1] == "Overall: TAMPERED"
    assert (out / "report.txt").is_file()
    assert (out / "report.json").is_file()


def test_bench_summarizes_an_earlier_run(tmp_path, capsys):
    row = BenchRow(
        resolution="v1",
        width=256,
        height=134,
        algorithm=DigestAlgorithm.MD5,
        mode=WriteMode.per_frame(),
        policy=SelectionPolicy.all(),
        frames=303,
        reps=20,
        median_serialize_us=120.0,
        median_hash_us=80.0,
        median_e2e_us=None,
        bytes_hashed=303 * 256 * 134,
        records=303,
    )
    path = tmp_path / "bench.csv"
    with open(path, "w", newline="") as fp:
        write_csv([row], fp)

    assert main(["bench", "--from-csv", str(path)]) == 0
    assert "256x134" in capsys.readouterr().out

    # a single cell does not cover the reference resolutions
    assert main(["bench", "--from-csv", str(path), "--check"]) == 1
    assert "Trend checks:" in capsys.readouterr().out


@pytest.mark.parametrize(
    "args",
    [
        ["bootstrap", "-n", "2", "-o", "unused"],
        ["demo", "dirty"],
        ["verify", "-a", "no-such-archive.sfv", "--snapshot", "."],
        ["tamper", "-i", "x.sfv", "-o", "y.sfv", "--frames", "3-1"],
        ["generate", "--width", "0", "-o", "unused.sfv"],
        ["bench", "--from-csv", "a.csv", "--config", "b.yaml"],
        ["ledger-query", "--snapshot", ".", "--frame", "1"],
    ],
    ids=lambda args: args[0],
)
def test_usage_errors(args, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as info:
        main(args)
    assert info.value.code == 2
