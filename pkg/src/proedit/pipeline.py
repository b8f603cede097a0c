"""Progressive edit orchestration.

A run walks the schedule stage by stage. Every stage starts with an opacity
reset, then trains on an edit buffer that a producer keeps filling with
freshly edited renders (iterative dataset update). Advancement is gated on
the running-mean loss stalling. Each completed stage persists a checkpoint
snapshot, which is both the resume point and one aggressivity level the user
can preview and keep.

Two execution modes share all the logic: a strictly single-threaded
interleaved mode (one edit per K train steps) that is bit-reproducible, and
a concurrent mode with a producer thread for wall-clock throughput.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .adaptive import MaintenanceConfig, Maintainer
from .buffer import EditBuffer
from .camera import Camera
from .checkpoint import load_cloud, save_cloud
from .editor import StrengthSchedule
from .errors import (
    ControlError,
    EditAbortError,
    IntegrityError,
    ProeditError,
    StructuralError,
    TransportError,
)
from .scheduler import LossWindow, Schedule, Stage, decompose, prune, update_convergence
from .splat import AdamState, GaussianCloud, render, train_step

METRICS_EVERY_DEFAULT = 10


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    deterministic: bool = True
    concurrent: bool = False
    edit_source: str = "current_renders"   # or "original_captures"
    interleave_k: int = 20
    max_iters_per_stage: int = 4000
    window: int = 200
    patience: int = 400
    rel_tolerance: float = 1e-4
    metrics_every: int = METRICS_EVERY_DEFAULT
    strength: StrengthSchedule = field(default_factory=StrengthSchedule)
    maintenance: MaintenanceConfig = field(default_factory=MaintenanceConfig)
    lrs: dict | None = None

    def __post_init__(self):
        if self.edit_source not in ("current_renders", "original_captures"):
            raise StructuralError(f"unknown edit_source {self.edit_source!r}")
        if self.interleave_k < 1 or self.max_iters_per_stage < 1:
            raise StructuralError("interleave_k and max_iters_per_stage must be >= 1")

    @property
    def run_concurrent(self) -> bool:
        return self.concurrent and not self.deterministic


@dataclass
class Snapshot:
    stage_index: int
    ratio: float
    checkpoint_path: str
    metrics: dict


class EventLog:
    """Append-only event list, mirrored to an NDJSON file, with waiters."""

    def __init__(self, path=None):
        self._cond = threading.Condition()
        self._events: list[dict] = []
        self._path = Path(path) if path is not None else None
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)

    def emit(self, event: str, **fields) -> dict:
        with self._cond:
            record = {"seq": len(self._events), "ts": time.time(), "event": event}
            record.update(fields)
            self._events.append(record)
            if self._path is not None:
                with self._path.open("a") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._cond.notify_all()
        return record

    def snapshot(self) -> list[dict]:
        with self._cond:
            return list(self._events)

    def wait_from(self, index: int, timeout: float = 1.0) -> list[dict]:
        """Events from ``index`` on, blocking up to ``timeout`` for new ones."""
        with self._cond:
            if len(self._events) <= index:
                self._cond.wait(timeout)
            return self._events[index:]


class ControlBus:
    """Thread-safe steering state shared between the run and the service."""

    def __init__(self):
        self._lock = threading.Lock()
        self._mode = "running"
        self._stop_at: int | None = None
        self._skip = False

    @property
    def mode(self) -> str:
        with self._lock:
            return self._mode

    @property
    def stop_at(self) -> int | None:
        with self._lock:
            return self._stop_at

    def pause(self) -> None:
        with self._lock:
            if self._mode not in ("running", "paused"):
                raise ControlError(f"cannot pause a {self._mode} run")
            self._mode = "paused"

    def resume(self) -> None:
        with self._lock:
            if self._mode not in ("running", "paused"):
                raise ControlError(f"cannot resume a {self._mode} run")
            self._mode = "running"

    def skip_stage(self) -> None:
        with self._lock:
            if self._mode not in ("running", "paused"):
                raise ControlError(f"cannot skip in a {self._mode} run")
            self._skip = True
            self._mode = "running"

    def request_stop_at(self, stage: int, current_stage: int) -> None:
        with self._lock:
            if self._mode not in ("running", "paused"):
                raise ControlError(f"cannot steer a {self._mode} run")
            if stage < current_stage:
                raise ControlError(
                    f"stop_at stage {stage} is before current stage {current_stage}"
                )
            self._stop_at = int(stage)

    def consume_skip(self) -> bool:
        with self._lock:
            skip, self._skip = self._skip, False
            return skip

    def _finish(self, final_mode: str) -> None:
        with self._lock:
            self._mode = final_mode


def _atomic_json(path: Path, payload: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


class ProgressiveRun:
    """Executes a finalized schedule over a cloud, producing one snapshot per
    stage and exposing live status, events, and steering to a control service."""

    def __init__(
        self,
        schedule: Schedule,
        cameras: list[Camera],
        editor,
        cloud: GaussianCloud,
        run_dir,
        cfg: PipelineConfig = PipelineConfig(),
        oracle=None,
        start_stage: int = 0,
        snapshots: list[Snapshot] | None = None,
        total_iterations: int = 0,
    ):
        if len(cameras) < 2:
            raise StructuralError("a run needs at least 2 views")
        if cloud.size > cfg.maintenance.hard_cap:
            raise StructuralError(
                f"initial cloud size {cloud.size} exceeds the hard cap "
                f"{cfg.maintenance.hard_cap}"
            )
        self.schedule = schedule
        self.cameras = list(cameras)
        self.editor = editor
        self.cfg = cfg
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.oracle = oracle
        self.control = ControlBus()
        self.events = EventLog(self.run_dir / "events.jsonl")
        self.snapshots: list[Snapshot] = list(snapshots or [])
        self.total_iterations = int(total_iterations)
        self._stages: list[Stage] = schedule.stages()
        self._stage_cursor = int(start_stage)
        self._cloud_lock = threading.RLock()
        self.cloud = cloud.copy()
        self.original_cloud = cloud.copy()
        self._status_lock = threading.Lock()
        self._status = {
            "stage_index": min(self._stage_cursor, max(len(self._stages) - 1, 0)),
            "ratio": None,
            "iteration": 0,
            "loss_running_mean": None,
            "n_gaussians": self.cloud.size,
        }
        self._metrics_path = self.run_dir / "metrics.jsonl"
        self._producer_error: BaseException | None = None
        self.original_captures = [
            render(self.original_cloud, cam).image for cam in self.cameras
        ]

    # ----- introspection -------------------------------------------------

    def status(self) -> dict:
        with self._status_lock:
            out = dict(self._status)
        out["mode"] = self.control.mode
        out["total_stages"] = len(self._stages)
        out["completed_stages"] = len(self.snapshots)
        return out

    def schedule_payload(self) -> dict:
        return {
            "ratios": list(self.schedule.ratios),
            "difficulties": list(self.schedule.difficulties),
            "threshold": self.schedule.threshold,
            "flags": {
                "prepend_refine": self.schedule.prepend_refine,
                "append_refine": self.schedule.append_refine,
                "threshold_met": self.schedule.threshold_met,
            },
            "stages": [asdict(s) for s in self._stages],
        }

    def snapshots_payload(self) -> list[dict]:
        return [asdict(s) for s in self.snapshots]

    def cloud_copy(self) -> GaussianCloud:
        with self._cloud_lock:
            return self.cloud.copy()

    def _set_status(self, **fields) -> None:
        with self._status_lock:
            self._status.update(fields)

    # ----- persistence ---------------------------------------------------

    def _persist_state(self) -> None:
        _atomic_json(
            self.run_dir / "state.json",
            {
                "mode": self.control.mode,
                "current_stage": self._stage_cursor,
                "total_stages": len(self._stages),
                "total_iterations": self.total_iterations,
                "snapshots": [asdict(s) for s in self.snapshots],
            },
        )

    @staticmethod
    def read_state(run_dir) -> dict | None:
        path = Path(run_dir) / "state.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    @classmethod
    def resume(
        cls,
        schedule: Schedule,
        cameras: list[Camera],
        editor,
        original_cloud: GaussianCloud,
        run_dir,
        cfg: PipelineConfig = PipelineConfig(),
        oracle=None,
    ) -> "ProgressiveRun":
        """Rebuild a run from its directory, restarting after the last
        completed stage (mid-stage progress is intentionally discarded)."""
        state = cls.read_state(run_dir)
        if state is None:
            raise IntegrityError(f"{run_dir}: no state.json to resume from")
        snapshots = [Snapshot(**rec) for rec in state.get("snapshots", [])]
        if snapshots:
            cloud, _ = load_cloud(snapshots[-1].checkpoint_path)
        else:
            cloud = original_cloud.copy()
        run = cls(
            schedule,
            cameras,
            editor,
            cloud,
            run_dir,
            cfg,
            oracle=oracle,
            start_stage=len(snapshots),
            snapshots=snapshots,
            total_iterations=int(state.get("total_iterations", 0)),
        )
        run.original_cloud = original_cloud.copy()
        run.original_captures = [
            render(run.original_cloud, cam).image for cam in run.cameras
        ]
        return run

    def _metrics_line(self, payload: dict) -> None:
        with self._metrics_path.open("a") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")

    # ----- stage execution ----------------------------------------------

    def _check_control(self) -> str:
        """Returns "continue" or "skip"; blocks while paused."""
        announced = False
        while True:
            if self.control.consume_skip():
                return "skip"
            mode = self.control.mode
            if mode != "paused":
                if announced:
                    self.events.emit("resumed", stage=self._stage_cursor)
                return "continue"
            if not announced:
                announced = True
                self.events.emit("paused", stage=self._stage_cursor)
            time.sleep(0.01)

    def _sample_view(self, buffer: EditBuffer, last_seen: list[int], rng) -> int | None:
        versions = buffer.versions()
        ready = [v for v in range(len(versions)) if versions[v] > 0]
        if not ready:
            return None
        weights = np.array(
            [2.0 if versions[v] > last_seen[v] else 1.0 for v in ready]
        )
        return int(rng.choice(ready, p=weights / weights.sum()))

    def _make_producer(self, stage: Stage, buffer: EditBuffer, strength_of):
        def produce(view_id: int) -> None:
            if self.cfg.edit_source == "original_captures":
                base = self.original_captures[view_id]
            else:
                with self._cloud_lock:
                    snap = self.cloud.copy()
                base = render(snap, self.cameras[view_id]).image
            edited = self.editor.edit(base, view_id, stage.ratio, strength_of())
            buffer.write(view_id, edited, stage.ratio)

        return produce

    def _run_stage(self, stage: Stage) -> None:
        cfg = self.cfg
        n_views = len(self.cameras)
        self._set_status(
            stage_index=stage.index,
            ratio=stage.ratio,
            iteration=0,
            n_gaussians=self.cloud.size,
        )
        self.events.emit(
            "stage_started", stage=stage.index, ratio=stage.ratio, kind=stage.kind
        )
        maintainer = Maintainer(cfg.maintenance)
        with self._cloud_lock:
            maintainer.opacity_reset(self.cloud)
            opt = AdamState(self.cloud)
        window = LossWindow(cfg.window)
        buffer = EditBuffer(n_views)
        sampler_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, stage.index, 0xA])
        )
        densify_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, stage.index, 0xB])
        )
        iteration = 0
        strength_of = lambda: cfg.strength.at(iteration / cfg.max_iters_per_stage)
        produce = self._make_producer(stage, buffer, strength_of)
        min_stage_iters = cfg.maintenance.warmup_iters + cfg.window

        producer_thread = None
        producer_stop = threading.Event()
        if cfg.run_concurrent:
            def producer_loop():
                view = 0
                try:
                    while not producer_stop.is_set():
                        produce(view)
                        view = (view + 1) % n_views
                except BaseException as exc:  # surfaced by the consumer
                    self._producer_error = exc

            producer_thread = threading.Thread(target=producer_loop, daemon=True)
            producer_thread.start()
            while not buffer.ready_views() and self._producer_error is None:
                time.sleep(0.001)
        else:
            for view in range(n_views):
                produce(view)

        last_seen = [0] * n_views
        next_produced_view = 0
        converged_emitted = False
        outcome = "max_iters"
        try:
            while iteration < cfg.max_iters_per_stage:
                if self._producer_error is not None:
                    exc = self._producer_error
                    if isinstance(exc, TransportError):
                        raise exc
                    raise EditAbortError(f"producer failed: {exc}") from exc
                if self._check_control() == "skip":
                    outcome = "skipped"
                    break
                view = self._sample_view(buffer, last_seen, sampler_rng)
                if view is None:
                    time.sleep(0.001)
                    continue
                record = buffer.read(view)
                last_seen[view] = record.version
                iteration += 1
                self.total_iterations += 1
                with self._cloud_lock:
                    loss = train_step(
                        self.cloud,
                        record.image,
                        self.cameras[view],
                        opt,
                        lrs=cfg.lrs,
                    )
                maintainer.tick()
                if maintainer.due(iteration):
                    with self._cloud_lock:
                        report = maintainer.maintain(self.cloud, densify_rng, opt)
                    if report.performed:
                        self._metrics_line(
                            {
                                "kind": "maintenance",
                                "stage": stage.index,
                                "iter": iteration,
                                "n_culled": report.n_culled,
                                "n_created": report.n_created,
                                "n_total_after": report.n_total_after,
                                "budget_used": report.budget_used,
                            }
                        )
                        self.events.emit(
                            "maintenance",
                            stage=stage.index,
                            iter=iteration,
                            n_culled=report.n_culled,
                            n_created=report.n_created,
                            n_total_after=report.n_total_after,
                        )
                converged = update_convergence(
                    window, loss, cfg.patience, cfg.rel_tolerance
                )
                if iteration % cfg.metrics_every == 0:
                    self._metrics_line(
                        {
                            "kind": "train",
                            "stage": stage.index,
                            "iter": iteration,
                            "loss": loss,
                            "running_mean": window.running_mean,
                            "n_gaussians": self.cloud.size,
                        }
                    )
                self._set_status(
                    iteration=iteration,
                    loss_running_mean=window.running_mean,
                    n_gaussians=self.cloud.size,
                )
                if converged and not converged_emitted:
                    converged_emitted = True
                    self.events.emit("converged", stage=stage.index, iter=iteration)
                if converged and iteration >= min_stage_iters:
                    outcome = "converged"
                    break
                if not cfg.run_concurrent and iteration % cfg.interleave_k == 0:
                    produce(next_produced_view)
                    next_produced_view = (next_produced_view + 1) % n_views
        finally:
            if producer_thread is not None:
                producer_stop.set()
                producer_thread.join(timeout=30.0)

        snapshot_path = self.run_dir / "snapshots" / f"{stage.index}.ply"
        with self._cloud_lock:
            save_cloud(
                self.cloud,
                snapshot_path,
                counters={
                    "stage_index": stage.index,
                    "stage_iterations": iteration,
                    "total_iterations": self.total_iterations,
                },
            )
            n_gaussians = self.cloud.size
        final_mean = window.running_mean
        snap = Snapshot(
            stage_index=stage.index,
            ratio=stage.ratio,
            checkpoint_path=str(snapshot_path),
            metrics={
                "iterations": iteration,
                "final_loss_mean": None if not window.values else final_mean,
                "n_gaussians": n_gaussians,
                "outcome": outcome,
            },
        )
        self.snapshots.append(snap)
        self.events.emit(
            "snapshot_written",
            stage=stage.index,
            ratio=stage.ratio,
            path=str(snapshot_path),
            iterations=iteration,
        )

    def execute(self) -> list[Snapshot]:
        """Run all remaining stages; returns the snapshot list."""
        self.schedule.save(self.run_dir / "schedule.txt")
        self._persist_state()
        try:
            while self._stage_cursor < len(self._stages):
                stage = self._stages[self._stage_cursor]
                stop_at = self.control.stop_at
                if stop_at is not None and stage.index > stop_at:
                    break
                self._run_stage(stage)
                self._stage_cursor += 1
                self._persist_state()
        except ProeditError:
            self.control._finish("aborted")
            self.events.emit("aborted", stage=self._stage_cursor)
            self._persist_state()
            raise
        self.control._finish("finished")
        self._set_status(mode="finished")
        self.events.emit("finished", stages_completed=len(self.snapshots))
        self._persist_state()
        return self.snapshots

    # ----- steering ------------------------------------------------------

    def current_stage_index(self) -> int:
        return self._stage_cursor

    def adjust_schedule(self, new_threshold: float) -> Schedule:
        """Re-decompose the remaining ratio interval under a new threshold.

        Only allowed while paused. Ratios up to and including the current
        stage's are preserved; the run resumes onto the new tail.
        """
        if not isinstance(new_threshold, (int, float)) or new_threshold <= 0:
            raise StructuralError("new threshold must be a positive number")
        if self.control.mode != "paused":
            raise ControlError("schedule adjustment requires a paused run")
        if self.oracle is None:
            raise ControlError("this run has no difficulty oracle attached")
        cursor = min(self._stage_cursor, len(self._stages) - 1)
        current = self._stages[cursor]
        r_cur = current.ratio
        if r_cur >= 1.0:
            self.events.emit(
                "schedule_adjusted", threshold=new_threshold, changed=False
            )
            return self.schedule

        tail, met = decompose(self.oracle, new_threshold, lo=r_cur, hi=1.0)
        tail = prune(tail, self.oracle, new_threshold)
        prefix = [r for r in self.schedule.ratios if r <= r_cur]
        ratios = prefix + [r for r in tail if r > r_cur]
        difficulties = [
            self.oracle(ratios[i - 1], ratios[i]) for i in range(1, len(ratios))
        ]
        self.schedule = Schedule(
            ratios=ratios,
            threshold=float(new_threshold),
            difficulties=difficulties,
            prepend_refine=self.schedule.prepend_refine,
            append_refine=self.schedule.append_refine,
            threshold_met=met,
        )
        prefix_stages = self._stages[: cursor + 1]
        tail_stages = []
        for r in [x for x in tail if x > r_cur]:
            tail_stages.append(Stage(0, r, "subtask"))
        if self.schedule.append_refine:
            tail_stages.append(Stage(0, 1.0, "refine"))
        for offset, st in enumerate(tail_stages):
            st.index = cursor + 1 + offset
        self._stages = prefix_stages + tail_stages
        self.schedule.save(self.run_dir / "schedule.txt")
        self._persist_state()
        self.events.emit(
            "schedule_adjusted",
            threshold=new_threshold,
            changed=True,
            ratios=ratios,
        )
        return self.schedule


# ----- snapshot consumption ----------------------------------------------


def select_aggressivity(snapshots: list[Snapshot], level: int) -> Snapshot:
    """Pick one completed stage's scene by index; verifies the file exists."""
    if not 0 <= level < len(snapshots):
        raise StructuralError(
            f"aggressivity level {level} outside 0..{len(snapshots) - 1}"
        )
    snap = snapshots[level]
    if not Path(snap.checkpoint_path).exists():
        raise IntegrityError(f"missing checkpoint {snap.checkpoint_path}")
    return snap


def preview(snapshot: Snapshot, cam: Camera) -> np.ndarray:
    """Render a stored snapshot from one camera; pure read."""
    cloud, _ = load_cloud(snapshot.checkpoint_path)
    return render(cloud, cam).image
