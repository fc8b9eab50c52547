import json

import numpy as np
import pytest

from hbpt import cli
from hbpt import synthgen as sg
from hbpt.config import PipelineConfig, load_config, parse_config_text

from conftest import read_jsonl


# ---------------------------------------------------------------------------
# config parsing

def test_config_defaults():
    cfg = PipelineConfig()
    assert cfg.learn_frames == 30
    assert cfg.tau == 4.0
    assert cfg.alpha == 0.05
    assert cfg.particles_n == 100
    assert cfg.d_xy == 30.0
    assert cfg.theta_open == 0.4
    assert cfg.min_part_area == 15


def test_config_parsing_and_types(tmp_path):
    text = """
# pipeline settings
scene.tau = 3.5
particles.n = 64
box.rect = [10, 20, 30, 40]
emit_overlays = true
pattern = "frame_*.png"
"""
    cfg = parse_config_text(text)
    assert cfg.tau == 3.5
    assert cfg.particles_n == 64
    assert cfg.box_rect == [10, 20, 30, 40]
    assert cfg.emit_overlays is True
    assert cfg.pattern == "frame_*.png"
    path = tmp_path / "run.cfg"
    path.write_text(text)
    assert load_config(path).tau == 3.5


def test_config_rejects_unknown_key():
    with pytest.raises(ValueError, match="unknown config key"):
        parse_config_text("scene.gamma = 2")


def test_config_rejects_bad_line():
    with pytest.raises(ValueError, match="key = value"):
        parse_config_text("just some words")


# ---------------------------------------------------------------------------
# CLI wiring

def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for sub in ("synth", "learn", "track", "baseline", "eval"):
        assert sub in out


def test_missing_input_directory_errors(tmp_path, capsys):
    rc = cli.main(
        ["track", "--input", str(tmp_path / "nope"), "--output", str(tmp_path / "out")]
    )
    assert rc == 1
    assert "nope" in capsys.readouterr().err


def test_synth_track_eval_round_trip(tmp_path, capsys):
    indir = tmp_path / "seq"
    outdir = tmp_path / "out"
    rc = cli.main(
        ["synth", "--scenario", "walker", "--frames", "60", "--output", str(indir), "--seed", "3"]
    )
    assert rc == 0
    rc = cli.main(["track", "--input", str(indir), "--output", str(outdir)])
    assert rc == 0
    records = read_jsonl(outdir / "blobs.jsonl")
    assert len(records) == 60
    assert json.loads((outdir / "events.json").read_text()) == []
    metrics = json.loads((outdir / "metrics.json").read_text())
    assert metrics["frames"] == 60
    assert metrics["fps"] == pytest.approx(60 / metrics["wall_time_s"], rel=0.01)
    rc = cli.main(
        ["eval", "--output", str(outdir), "--truth", str(indir / "truth.json")]
    )
    assert rc == 0
    summary = json.loads((outdir / "eval.json").read_text())
    assert summary["scenario"] == "walker"
    assert summary["centroid_rms_px"] < 2.5


def test_track_runs_are_byte_identical(tmp_path):
    indir = tmp_path / "seq"
    sg.write_scenario(sg.Scenario("walker", frames=45, seed=4), indir)
    outs = []
    for run in ("a", "b"):
        outdir = tmp_path / run
        cli.run_pipeline(PipelineConfig(input=str(indir), output=str(outdir), seed=7))
        outs.append(
            (
                (outdir / "blobs.jsonl").read_bytes(),
                (outdir / "events.json").read_bytes(),
            )
        )
    assert outs[0] == outs[1]


def test_learn_then_track_with_saved_scene(tmp_path, capsys):
    indir = tmp_path / "seq"
    sg.write_scenario(sg.Scenario("walker", frames=40, seed=5), indir)
    rc = cli.main(["learn", "--input", str(indir), "--output", str(tmp_path)])
    assert rc == 0
    scene_file = tmp_path / "scene.bin"
    assert scene_file.exists()
    cfg = PipelineConfig(
        input=str(indir), output=str(tmp_path / "out"), scene_file=str(scene_file)
    )
    cli.run_pipeline(cfg)
    records = read_jsonl(tmp_path / "out" / "blobs.jsonl")
    assert sum(1 for r in records if r["tracked"]) >= 8


def test_overlays_written_when_enabled(tmp_path):
    indir = tmp_path / "seq"
    sg.write_scenario(sg.Scenario("walker", frames=34, seed=6), indir)
    cfg = PipelineConfig(input=str(indir), output=str(tmp_path / "out"), emit_overlays=True)
    cli.run_pipeline(cfg)
    overlays = sorted((tmp_path / "out").glob("out_*.ppm"))
    assert len(overlays) == 34


def test_baseline_subcommand(tmp_path, capsys):
    indir = tmp_path / "seq"
    sg.write_scenario(sg.Scenario("walker", frames=40, seed=8), indir)
    rc = cli.main(["baseline", "--input", str(indir), "--output", str(tmp_path / "out")])
    assert rc == 0
    entries = read_jsonl(tmp_path / "out" / "baseline.jsonl")
    assert len(entries) == 40
    labeled = [e for e in entries if e["labels"]]
    assert len(labeled) >= 8
    for e in labeled:
        assert e["labels"]["torso"] is not None
        assert e["labels"]["head"] is not None


def test_baseline_mode_flag_emits_labels_during_track(tmp_path):
    indir = tmp_path / "seq"
    sg.write_scenario(sg.Scenario("walker", frames=36, seed=10), indir)
    cfg = PipelineConfig(input=str(indir), output=str(tmp_path / "out"), baseline_mode=True)
    cli.run_pipeline(cfg)
    entries = read_jsonl(tmp_path / "out" / "baseline.jsonl")
    assert len(entries) == 36
    assert any(e["labels"] for e in entries)


def test_record_shape(tmp_path):
    indir = tmp_path / "seq"
    sg.write_scenario(sg.Scenario("walker", frames=36, seed=9), indir)
    cli.run_pipeline(PipelineConfig(input=str(indir), output=str(tmp_path / "out")))
    records = read_jsonl(tmp_path / "out" / "blobs.jsonl")
    tracked = [r for r in records if r["tracked"]]
    assert tracked
    r = tracked[-1]
    assert set(r) == {"frame", "tracked", "person", "torso_disc", "parts", "starfish"}
    assert len(r["person"]["bbox"]) == 4
    assert "torso" in r["parts"]
    blob = r["parts"]["torso"]
    assert set(blob) == {"label", "mu", "K", "color", "area"}
