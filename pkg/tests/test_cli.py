import json
from pathlib import Path

import pytest

from buttonsim.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Full pipeline run shared by the stage tests below."""
    root = tmp_path_factory.mktemp("pipeline")
    assert run_cli(
        "synth-capture", "--out", root / "captures", "--presses", "8", "--seed", "3"
    ) == 0
    captures = sorted((root / "captures").glob("*.json"))
    assert len(captures) == 4
    assert run_cli(
        "ingest", "--capture", *captures, "--out", root / "presses.json"
    ) == 0
    assert run_cli(
        "fit",
        "--presses", root / "presses.json",
        "--penalty", "2.5",
        "--out", root / "model.json",
        "--activation", "2.0",
    ) == 0
    assert run_cli(
        "compensate",
        "--model", root / "model.json",
        "--out", root / "actuation.json",
        "--runs", "2",
        "--velocities", "50,100",
        "--figures", root / "figures",
    ) == 0
    assert run_cli(
        "simulate",
        "--actuation", root / "actuation.json",
        "--model", root / "model.json",
        "--velocity", "0.5",
        "--out", root / "trace.jsonl",
    ) == 0
    return root


class TestPipeline:
    def test_presses_schema(self, pipeline_dir):
        payload = json.loads((pipeline_dir / "presses.json").read_text())
        assert payload["grid_mm"] == 0.05
        assert [e["velocity_mm_s"] for e in payload["velocities"]] == [50, 100, 150, 200]
        assert all(e["complete_count"] >= 1 for e in payload["velocities"])

    def test_model_schema_with_best_k_report(self, pipeline_dir):
        model = json.loads((pipeline_dir / "model.json").read_text())
        assert model["travel_range_mm"] == 4.0
        assert len(model["press_curves"]) == 4
        report = json.loads((pipeline_dir / "model.report.json").read_text())
        assert set(report) == {"50.0", "100.0", "150.0", "200.0"}
        assert all("best_k" in entry for entry in report.values())

    def test_vibration_detected_from_sound_channel(self, pipeline_dir):
        model = json.loads((pipeline_dir / "model.json").read_text())
        vibration = model["vibration"]
        assert 2.0 <= vibration["onset_mm"] <= 2.8  # burst injected at 2.4 mm
        assert 180 <= vibration["frequency_hz"] <= 300

    def test_actuation_schema(self, pipeline_dir):
        table = json.loads((pipeline_dir / "actuation.json").read_text())
        assert table["button_id"] == "synthetic-tactile"
        assert [c["velocity_mm_s"] for c in table["curves"]] == [50.0, 100.0]
        assert all(c["grid_mm"] == 0.05 for c in table["curves"])

    def test_trace_final_error_within_budget(self, pipeline_dir):
        lines = (pipeline_dir / "trace.jsonl").read_text().splitlines()
        records = [json.loads(l) for l in lines if l.strip()]
        assert len(records) > 8000  # 0.5 mm/s probe over 4 mm
        events = [e for r in records for e in r["events"]]
        assert "bottom_out" in events

    def test_figures_written(self, pipeline_dir):
        figures = pipeline_dir / "figures"
        assert (figures / "compensation_errors.png").exists()
        assert (figures / "compensation_errors.csv").exists()
        assert (figures / "actuation.png").exists()
        assert (figures / "actuation.csv").exists()

    def test_report_command(self, pipeline_dir, tmp_path):
        out = tmp_path / "report"
        assert run_cli(
            "report",
            "--model", pipeline_dir / "model.json",
            "--actuation", pipeline_dir / "actuation.json",
            "--trace", pipeline_dir / "trace.jsonl",
            "--out", out,
        ) == 0
        assert (out / "model_curves.png").exists()
        assert (out / "model_curves.csv").exists()
        assert (out / "trace_overlay.png").exists()
        # delimited output alongside the figures
        header = (out / "model_curves.csv").read_text().splitlines()[0]
        assert header == "velocity_mm_s,displacement_mm,force_cN"


class TestExitCodes:
    def test_unknown_subcommand_usage_error(self, capsys):
        assert run_cli("frobnicate") == 64

    def test_unknown_flag_usage_error(self):
        assert run_cli("fit", "--nope") == 64

    def test_validation_error_exit_1(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run_cli("fit", "--presses", bad, "--out", tmp_path / "m.json") == 1

    def test_travel_mismatch_exit_1(self, pipeline_dir, tmp_path):
        # actuation for a 4 mm button on a 3.6 mm model config
        model = json.loads((pipeline_dir / "model.json").read_text())
        model["travel_range_mm"] = 3.6
        for curve in model["press_curves"]:
            pts = curve["control_points"]
            scale = 3.6 / 4.0
            curve["control_points"] = [[d * scale, f] for d, f in pts]
        bad_model = tmp_path / "short.json"
        bad_model.write_text(json.dumps(model))
        code = run_cli(
            "simulate",
            "--actuation", pipeline_dir / "actuation.json",
            "--model", bad_model,
            "--out", tmp_path / "t.jsonl",
        )
        assert code == 1

    def test_missing_file_exit_1(self, tmp_path):
        assert run_cli(
            "compensate", "--model", tmp_path / "none.json", "--out", tmp_path / "a.json"
        ) == 1


class TestReleaseStrokes:
    def test_release_flag_produces_release_curves(self, tmp_path):
        assert run_cli(
            "synth-capture", "--out", tmp_path / "captures", "--presses", "6",
            "--velocities", "50,100", "--seed", "9",
        ) == 0
        captures = sorted((tmp_path / "captures").glob("*.json"))
        assert run_cli(
            "ingest", "--capture", *captures, "--out", tmp_path / "presses.json", "--release"
        ) == 0
        payload = json.loads((tmp_path / "presses.json").read_text())
        assert all("release_force_cN" in e for e in payload["velocities"])
        assert run_cli(
            "fit", "--presses", tmp_path / "presses.json",
            "--out", tmp_path / "model.json", "--activation", "2.0",
        ) == 0
        model = json.loads((tmp_path / "model.json").read_text())
        assert len(model["release_curves"]) == 2


class TestOptimizeAndWave:
    def test_optimize_writes_history(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"budget": 4, "trials_per_eval": 5, "seed": 1}))
        out = tmp_path / "history.jsonl"
        assert run_cli("optimize", "--config", config, "--out", out) == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 4
        assert lines[0]["iteration"] == 1

    def test_export_wave(self, pipeline_dir, tmp_path):
        out = tmp_path / "waves"
        assert run_cli("export-wave", "--model", pipeline_dir / "model.json", "--out", out) == 0
        wavs = list(out.glob("*.wav"))
        assert len(wavs) == 9  # 3 frequencies x 3 end amplitudes
        assert (out / "templates.json").exists()

    def test_simulate_with_preset(self, pipeline_dir, tmp_path):
        out = tmp_path / "preset_trace.jsonl"
        assert run_cli(
            "simulate",
            "--actuation", pipeline_dir / "actuation.json",
            "--model", pipeline_dir / "model.json",
            "--velocity", "120",
            "--preset", "multi-level",
            "--out", out,
        ) == 0
        records = [json.loads(l) for l in out.read_text().splitlines() if l.strip()]
        events = [e for r in records for e in r["events"]]
        assert "detent_0" in events
