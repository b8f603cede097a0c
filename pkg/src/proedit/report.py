"""Run reports: figures for humans, CSV for spreadsheets.

Reads a run directory's metrics, schedule, and snapshots and writes a
report directory with loss/count curves, a schedule difficulty chart, a
snapshot contact sheet, and the same data flattened to CSV.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .checkpoint import load_cloud
from .config import build_cameras, load_config
from .errors import IntegrityError
from .scheduler import Schedule
from .splat import render

FIG_DPI = 120


def read_metrics(run_dir: Path) -> tuple[list[dict], list[dict]]:
    path = run_dir / "metrics.jsonl"
    train, maintenance = [], []
    if not path.exists():
        return train, maintenance
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        if record.get("kind") == "maintenance":
            maintenance.append(record)
        else:
            train.append(record)
    return train, maintenance


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _loss_figure(train: list[dict], out: Path) -> None:
    fig, (ax_loss, ax_count) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    stages = sorted({r["stage"] for r in train})
    offset = 0
    ticks = []
    for stage in stages:
        rows = [r for r in train if r["stage"] == stage]
        xs = [offset + r["iter"] for r in rows]
        ax_loss.plot(xs, [r["loss"] for r in rows], lw=0.6, alpha=0.5, color="tab:blue")
        ax_loss.plot(
            xs, [r["running_mean"] for r in rows], lw=1.4, color="tab:orange"
        )
        ax_count.step(xs, [r["n_gaussians"] for r in rows], where="post", color="tab:green")
        if rows:
            ticks.append((offset, stage))
            offset = xs[-1]
            ax_loss.axvline(offset, color="0.85", lw=0.8)
            ax_count.axvline(offset, color="0.85", lw=0.8)
    for x, stage in ticks:
        ax_loss.annotate(f"s{stage}", (x, ax_loss.get_ylim()[1]), fontsize=7, va="top")
    ax_loss.set_ylabel("loss / running mean")
    ax_count.set_ylabel("gaussians")
    ax_count.set_xlabel("cumulative training iteration")
    fig.tight_layout()
    fig.savefig(out, dpi=FIG_DPI)
    plt.close(fig)


def _schedule_figure(schedule: Schedule, out: Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 3))
    mids = [
        0.5 * (schedule.ratios[i] + schedule.ratios[i + 1])
        for i in range(len(schedule.ratios) - 1)
    ]
    widths = [
        schedule.ratios[i + 1] - schedule.ratios[i]
        for i in range(len(schedule.ratios) - 1)
    ]
    ax.bar(mids, schedule.difficulties, width=[w * 0.92 for w in widths], color="tab:purple")
    ax.axhline(schedule.threshold, color="tab:red", lw=1.2, ls="--", label="threshold")
    for r in schedule.ratios:
        ax.axvline(r, color="0.8", lw=0.6)
    ax.set_xlabel("subtask ratio r")
    ax.set_ylabel("difficulty d")
    ax.set_xlim(-0.02, 1.02)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=FIG_DPI)
    plt.close(fig)


def _snapshot_sheet(run_dir: Path, snapshots: list[dict], out: Path, max_views: int = 4) -> None:
    config = load_config(run_dir / "config.json")
    cameras = build_cameras(config)[:max_views]
    if not snapshots or not cameras:
        return
    rows = len(snapshots)
    cols = len(cameras)
    fig, axes = plt.subplots(
        rows, cols, figsize=(2.2 * cols, 2.2 * rows), squeeze=False
    )
    for i, snap in enumerate(snapshots):
        cloud, _ = load_cloud(snap["checkpoint_path"])
        for j, cam in enumerate(cameras):
            ax = axes[i][j]
            ax.imshow(np.clip(render(cloud, cam).image, 0.0, 1.0))
            ax.set_xticks([])
            ax.set_yticks([])
            if j == 0:
                ax.set_ylabel(f"s{snap['stage_index']}\nr={snap['ratio']:.2f}", fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=FIG_DPI)
    plt.close(fig)


def generate_report(run_dir, out_dir) -> list[Path]:
    """Render figures and CSV tables for a finished (or running) run."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir)
    if not run_dir.exists():
        raise IntegrityError(f"run directory {run_dir} does not exist")
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    train, maintenance = read_metrics(run_dir)
    if train:
        path = out_dir / "training.png"
        _loss_figure(train, path)
        written.append(path)
    path = out_dir / "metrics.csv"
    _write_csv(
        path, train, ["stage", "iter", "loss", "running_mean", "n_gaussians"]
    )
    written.append(path)
    if maintenance:
        path = out_dir / "maintenance.csv"
        _write_csv(
            path,
            maintenance,
            ["stage", "iter", "n_culled", "n_created", "n_total_after", "budget_used"],
        )
        written.append(path)

    schedule_path = run_dir / "schedule.txt"
    if schedule_path.exists():
        schedule = Schedule.load(schedule_path)
        path = out_dir / "schedule.png"
        _schedule_figure(schedule, path)
        written.append(path)
        path = out_dir / "schedule.csv"
        _write_csv(
            path,
            [
                {
                    "r_lo": schedule.ratios[i],
                    "r_hi": schedule.ratios[i + 1],
                    "difficulty": schedule.difficulties[i],
                    "threshold": schedule.threshold,
                }
                for i in range(len(schedule.difficulties))
            ],
            ["r_lo", "r_hi", "difficulty", "threshold"],
        )
        written.append(path)

    state = run_dir / "state.json"
    if state.exists():
        snapshots = json.loads(state.read_text()).get("snapshots", [])
        if snapshots:
            _write_csv(
                out_dir / "snapshots.csv",
                [
                    {
                        "stage_index": s["stage_index"],
                        "ratio": s["ratio"],
                        "iterations": s["metrics"].get("iterations"),
                        "final_loss_mean": s["metrics"].get("final_loss_mean"),
                        "n_gaussians": s["metrics"].get("n_gaussians"),
                        "checkpoint": s["checkpoint_path"],
                    }
                    for s in snapshots
                ],
                [
                    "stage_index",
                    "ratio",
                    "iterations",
                    "final_loss_mean",
                    "n_gaussians",
                    "checkpoint",
                ],
            )
            written.append(out_dir / "snapshots.csv")
            if (run_dir / "config.json").exists():
                path = out_dir / "snapshots.png"
                _snapshot_sheet(run_dir, snapshots, path)
                written.append(path)
    return written
