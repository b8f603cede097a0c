"""CLI round-trips: decompose, run, preview, export, report."""

import json

import numpy as np
import pytest

from proedit.checkpoint import load_cloud
from proedit.cli import main
from proedit.config import RunConfig, save_config
from proedit.image import load_png
from proedit.scheduler import Schedule


def write_config(path, **overrides):
    base = dict(
        scene="texture",
        scene_size=40,
        scene_seed=3,
        n_views=3,
        width=32,
        height=32,
        threshold=10.0,
        preset=None,
        seed=0,
        deterministic=True,
        max_iters_per_stage=20,
        window=6,
        patience=8,
        warmup_iters=4,
        maintenance_interval=10,
    )
    base.update(overrides)
    return save_config(RunConfig(**base), path)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    """One finished CLI run shared by the read-only command tests."""
    tmp = tmp_path_factory.mktemp("cli")
    cfg_path = write_config(tmp / "cfg.json")
    out = tmp / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    return out


def test_decompose_writes_schedule(tmp_path, capsys):
    cfg_path = write_config(tmp_path / "cfg.json")
    out = tmp_path / "dec"
    assert main(["decompose", "--config", str(cfg_path), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "threshold 10" in printed
    assert "stages:" in printed
    # Threshold above d(0, 1) keeps the span as a single subtask.
    schedule = Schedule.load(out / "schedule.txt")
    assert schedule.ratios == [0.0, 1.0]
    assert schedule.threshold_met
    assert (out / "difficulty_cache.txt").exists()
    assert (out / "embeddings.txt").exists()


def test_run_produces_artifacts(run_dir):
    for name in (
        "config.json",
        "schedule.txt",
        "embeddings.txt",
        "difficulty_cache.txt",
        "metrics.jsonl",
        "state.json",
        "events.jsonl",
    ):
        assert (run_dir / name).exists(), name
    state = json.loads((run_dir / "state.json").read_text())
    assert state["mode"] == "finished"
    snapshots = state["snapshots"]
    assert [s["stage_index"] for s in snapshots] == [0, 1, 2]
    for snap in snapshots:
        assert (run_dir / "snapshots" / f"{snap['stage_index']}.ply").exists()


def test_run_prints_stage_lines(tmp_path, capsys):
    cfg_path = write_config(tmp_path / "cfg.json")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert printed.count("stage ") == 3
    assert f"run directory: {out}" in printed


def test_deterministic_runs_equal_loss_columns(tmp_path):
    cfg_path = write_config(tmp_path / "cfg.json")

    def losses(out):
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        return [
            json.loads(line)["loss"]
            for line in (out / "metrics.jsonl").read_text().splitlines()
            if json.loads(line)["kind"] == "train"
        ]

    first = losses(tmp_path / "a")
    second = losses(tmp_path / "b")
    assert first and first == second


def test_run_resume_after_completion_is_stable(run_dir, tmp_path, capsys):
    cfg_path = write_config(tmp_path / "cfg.json")
    before = json.loads((run_dir / "state.json").read_text())
    assert (
        main(["run", "--config", str(cfg_path), "--out", str(run_dir), "--resume"]) == 0
    )
    after = json.loads((run_dir / "state.json").read_text())
    assert [s["stage_index"] for s in after["snapshots"]] == [
        s["stage_index"] for s in before["snapshots"]
    ]
    assert after["mode"] == "finished"


def test_preview_writes_png(run_dir, tmp_path, capsys):
    out_png = tmp_path / "view.png"
    code = main(
        [
            "preview",
            "--run-dir",
            str(run_dir),
            "--snapshot",
            "2",
            "--view",
            "1",
            "--out",
            str(out_png),
        ]
    )
    assert code == 0
    image = load_png(out_png)
    assert image.shape == (32, 32, 3)
    assert np.all((image >= 0.0) & (image <= 1.0))


def test_preview_rejects_bad_view_and_snapshot(run_dir, tmp_path, capsys):
    args = ["preview", "--run-dir", str(run_dir), "--out", str(tmp_path / "x.png")]
    assert main(args + ["--snapshot", "0", "--view", "9"]) == 1
    assert "error:" in capsys.readouterr().err
    assert main(args + ["--snapshot", "7", "--view", "0"]) == 1
    assert "no snapshot" in capsys.readouterr().err


def test_export_snapshot_with_manifest(run_dir, tmp_path, capsys):
    out = tmp_path / "exported"
    code = main(
        ["export", "--run-dir", str(run_dir), "--snapshot", "1", "--out-dir", str(out)]
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stage_index"] == 1
    assert sorted(manifest["files"]) == ["1.meta", "1.ply"]
    assert (out / "1.ply").exists() and (out / "1.meta").exists()
    original = (run_dir / "snapshots" / "1.ply").read_bytes()
    assert (out / "1.ply").read_bytes() == original
    cloud, counters = load_cloud(out / "1.ply")
    assert cloud.size == manifest["n_gaussians"] == manifest["metrics"]["n_gaussians"]
    assert counters["stage_index"] == 1


def test_report_renders_figures_and_csv(run_dir, capsys):
    assert main(["report", "--run-dir", str(run_dir)]) == 0
    report_dir = run_dir / "report"
    for name in (
        "training.png",
        "metrics.csv",
        "maintenance.csv",
        "schedule.png",
        "schedule.csv",
        "snapshots.csv",
        "snapshots.png",
    ):
        path = report_dir / name
        assert path.exists(), name
        assert path.stat().st_size > 0, name
    header = (report_dir / "metrics.csv").read_text().splitlines()[0]
    assert header == "stage,iter,loss,running_mean,n_gaussians"
    rows = (report_dir / "snapshots.csv").read_text().splitlines()
    assert len(rows) == 1 + 3  # header + one row per stage


def test_missing_config_exits_cleanly(tmp_path, capsys):
    assert main(["decompose", "--config", str(tmp_path / "absent.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_bad_config_key_exits_cleanly(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"scene": "texture", "wat": 1}\n')
    assert main(["decompose", "--config", str(path)]) == 1
    assert "unknown config keys" in capsys.readouterr().err
