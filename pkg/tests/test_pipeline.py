import pytest

from veriframe.errors import PipelineStageError, UsageError
from veriframe.model import StreamHeader
from veriframe.frame_io import synthetic_stream_id
from veriframe.pipeline import Scenario, ScenarioKind, demo_pipeline
from veriframe.transport.capture import predict_delivered_frames
from veriframe.verifier import Overall, VerdictStatus, parse_report


SMALL = {"width": 64, "height": 48, "frames": 30}


@pytest.mark.parametrize(
    "value,expected",
    [
        ("clean", Scenario()),
        (" Clean ", Scenario()),
        ("tampered:5", Scenario(ScenarioKind.TAMPERED, tampered=5)),
        ("tampered", Scenario(ScenarioKind.TAMPERED, tampered=1)),
        ("lossy:0.25", Scenario(ScenarioKind.LOSSY, drop=0.25)),
        ("lossy", Scenario(ScenarioKind.LOSSY, drop=0.1)),
    ],
)
def test_scenario_spellings(value, expected):
    scenario = Scenario.from_string(value)
    assert scenario == expected
    assert Scenario.from_string(str(scenario)) == scenario


@pytest.mark.parametrize(
    "value", ["dirty", "clean:1", "tampered:x", "tampered:-1", "lossy:1.5", "lossy:-0.1"]
)
def test_invalid_scenarios(value):
    with pytest.raises(UsageError):
        Scenario.from_string(value)


def test_clean_demo_is_authentic(tmp_path):
    result = demo_pipeline(Scenario(), tmp_path / "demo", **SMALL)

    assert result.exit_code == 0
    assert result.report.overall is Overall.AUTHENTIC
    assert result.report.counts[VerdictStatus.AUTHENTIC] == 30
    assert result.tampered_frames == []
    assert result.pipeline.ingest.records_committed == 30

    assert result.text_report.read_text().splitlines()[-1] == "Overall: AUTHENTIC"
    parsed = parse_report(result.json_report.read_text())
    assert parsed.overall is Overall.AUTHENTIC
    assert len(parsed.verdicts) == 30


def test_tampered_demo_flags_exactly_the_altered_frames(tmp_path):
    result = demo_pipeline(Scenario.from_string("tampered:5"), tmp_path, seed=3, **SMALL)

    assert result.exit_code == 2
    assert len(result.tampered_frames) == 5
    assert result.report.frames_with(VerdictStatus.TAMPERED) == result.tampered_frames
    assert result.report.counts[VerdictStatus.AUTHENTIC] == 25
    assert (tmp_path / "tampered.sfv").is_file()


def test_tampered_demo_is_reproducible(tmp_path):
    first = demo_pipeline(Scenario.from_string("tampered:3"), tmp_path / "a", seed=9, **SMALL)
    second = demo_pipeline(Scenario.from_string("tampered:3"), tmp_path / "b", seed=9, **SMALL)

    assert first.tampered_frames == second.tampered_frames
    assert first.json_report.read_text() == second.json_report.read_text()


def test_lossy_demo_reports_the_predicted_gaps(tmp_path):
    drop, seed = 0.5, 4
    header = StreamHeader(synthetic_stream_id(seed), 64, 48, frame_count=30)
    missing = sorted(set(range(30)) - predict_delivered_frames(header, drop, seed))
    assert missing

    result = demo_pipeline(
        Scenario(ScenarioKind.LOSSY, drop=drop), tmp_path, seed=seed, **SMALL
    )

    assert result.report.frames_with(VerdictStatus.FRAME_MISSING) == missing
    assert result.report.counts[VerdictStatus.AUTHENTIC] == 30 - len(missing)
    assert result.report.counts[VerdictStatus.TAMPERED] == 0
    assert result.pipeline.ingest.records_discarded == len(missing)
    assert result.pipeline.ingest.records_committed == 30 - len(missing)
    assert result.exit_code == 3


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_full_size_lossy_demo_matches_the_predicted_gaps(tmp_path, seed):
    header = StreamHeader(synthetic_stream_id(seed), 256, 134, frame_count=303)
    missing = sorted(set(range(303)) - predict_delivered_frames(header, 0.1, seed))

    result = demo_pipeline(Scenario(ScenarioKind.LOSSY, drop=0.1), tmp_path, seed=seed)

    assert result.report.frames_with(VerdictStatus.FRAME_MISSING) == missing
    assert result.report.counts[VerdictStatus.TAMPERED] == 0
    assert result.report.counts[VerdictStatus.AUTHENTIC] == 303 - len(missing)
    assert result.exit_code == (3 if missing else 0)


def test_failing_stage_is_named(tmp_path):
    with pytest.raises(PipelineStageError) as info:
        demo_pipeline(Scenario.from_string("tampered:31"), tmp_path, **SMALL)
    assert info.value.stage == "tamper"
    assert "tamper stage failed" in info.value.msg


@pytest.mark.slow
@pytest.mark.parametrize("count", [1, 50])
def test_full_size_tampered_demo(tmp_path, count):
    result = demo_pipeline(Scenario(ScenarioKind.TAMPERED, tampered=count), tmp_path)

    assert result.report.counts[VerdictStatus.TAMPERED] == count
    assert result.report.counts[VerdictStatus.AUTHENTIC] == 303 - count
    assert result.report.overall is Overall.TAMPERED
    assert result.exit_code == 2
