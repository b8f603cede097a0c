"""Command-line entry points.

    proedit decompose --config cfg.json [--out DIR]
    proedit run       --config cfg.json [--out DIR] [--serve ADDR]
                      [--deterministic] [--resume] [--linger SECONDS]
    proedit preview   --run-dir DIR --snapshot K --view V --out PNG
    proedit export    --run-dir DIR --snapshot K --out-dir DIR
    proedit report    --run-dir DIR [--out-dir DIR]
"""

from __future__ import annotations

import argparse
import shutil
import sys
import time
from pathlib import Path

from . import config as config_mod
from .checkpoint import load_cloud, sidecar_path
from .difficulty import DifficultyCache, make_oracle, select_views
from .embedding import save_embeddings, synthetic_pair, load_embeddings
from .errors import ProeditError, StructuralError
from .image import save_png
from .pipeline import PipelineConfig, ProgressiveRun, Snapshot, preview
from .scheduler import Schedule, build_schedule, preset_threshold
from .service import ControlService, parse_address
from .splat import render


def _assemble(cfg):
    """Build scene, cameras, editor, and the difficulty oracle from a config."""
    source, target = config_mod.build_scene(cfg)
    cameras = config_mod.build_cameras(cfg)
    editor = config_mod.build_editor(cfg, source, target, cameras)
    base_renders = [render(source, cam).image for cam in cameras]
    view_ids = select_views(len(cameras), seed=cfg.seed)

    def task_output(view_id: int, r: float):
        return editor.edit(base_renders[view_id], view_id, r, 1.0)

    cache = DifficultyCache()
    oracle = make_oracle(view_ids, task_output, cache=cache)
    return source, target, cameras, editor, oracle


def _embeddings_for(cfg):
    if cfg.embeddings_path:
        return load_embeddings(cfg.embeddings_path)
    return synthetic_pair(cfg.embedding_dim, cfg.seed)


def _resolve_threshold(cfg, oracle) -> float:
    if cfg.threshold is not None:
        return float(cfg.threshold)
    return preset_threshold(oracle, cfg.preset)


def _schedule_table(schedule: Schedule) -> str:
    lines = [
        f"threshold {schedule.threshold:.6g}"
        + ("" if schedule.threshold_met else "  (width floor hit)"),
        f"{'i':>3} {'r_lo':>10} {'r_hi':>10} {'difficulty':>12}",
    ]
    for i in range(len(schedule.difficulties)):
        lines.append(
            f"{i:>3} {schedule.ratios[i]:>10.6f} {schedule.ratios[i + 1]:>10.6f} "
            f"{schedule.difficulties[i]:>12.6f}"
        )
    stages = ", ".join(f"{s.index}:{s.kind}@{s.ratio:g}" for s in schedule.stages())
    lines.append(f"stages: {stages}")
    return "\n".join(lines)


def _pipeline_config(cfg, deterministic: bool) -> PipelineConfig:
    return PipelineConfig(
        seed=cfg.seed,
        deterministic=deterministic,
        concurrent=cfg.concurrent,
        edit_source=cfg.edit_source,
        interleave_k=cfg.interleave_k,
        max_iters_per_stage=cfg.max_iters_per_stage,
        window=cfg.window,
        patience=cfg.patience,
        rel_tolerance=cfg.rel_tolerance,
        strength=config_mod.build_strength(cfg),
        maintenance=config_mod.build_maintenance(cfg),
    )


def cmd_decompose(args) -> int:
    cfg = config_mod.apply_env_seed(config_mod.load_config(args.config))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, _, _, _, oracle = _assemble(cfg)
    threshold = _resolve_threshold(cfg, oracle)
    schedule = build_schedule(oracle, threshold)
    schedule.save(out_dir / "schedule.txt")
    oracle.cache.dump(out_dir / "difficulty_cache.txt")
    save_embeddings(_embeddings_for(cfg), out_dir / "embeddings.txt")
    print(_schedule_table(schedule))
    print(f"wrote {out_dir / 'schedule.txt'}")
    return 0


def cmd_run(args) -> int:
    cfg = config_mod.apply_env_seed(config_mod.load_config(args.config))
    if args.deterministic:
        import dataclasses

        cfg = dataclasses.replace(cfg, deterministic=True)
    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    source, target, cameras, editor, oracle = _assemble(cfg)

    if args.resume:
        schedule = Schedule.load(run_dir / "schedule.txt")
    else:
        threshold = _resolve_threshold(cfg, oracle)
        schedule = build_schedule(oracle, threshold)
    config_mod.save_config(cfg, run_dir / "config.json")
    save_embeddings(_embeddings_for(cfg), run_dir / "embeddings.txt")
    oracle.cache.dump(run_dir / "difficulty_cache.txt")

    pipeline_cfg = _pipeline_config(cfg, cfg.deterministic or args.deterministic)
    if args.resume:
        run = ProgressiveRun.resume(
            schedule, cameras, editor, source, run_dir, pipeline_cfg, oracle=oracle
        )
    else:
        run = ProgressiveRun(
            schedule, cameras, editor, source, run_dir, pipeline_cfg, oracle=oracle
        )

    serve_addr = args.serve or cfg.serve
    service = None
    if serve_addr:
        host, port = parse_address(serve_addr)
        service = ControlService(run, host, port).start()
        print(f"serving control API at {service.url}")

    try:
        snapshots = run.execute()
    finally:
        if service is not None and args.linger > 0:
            print(f"run finished; serving for another {args.linger:.0f}s")
            time.sleep(args.linger)
        if service is not None:
            service.stop()
    for snap in snapshots:
        print(
            f"stage {snap.stage_index} r={snap.ratio:g} "
            f"iters={snap.metrics['iterations']} "
            f"gaussians={snap.metrics['n_gaussians']} -> {snap.checkpoint_path}"
        )
    print(f"run directory: {run_dir}")
    return 0


def _load_run_snapshots(run_dir: Path) -> list[Snapshot]:
    state = ProgressiveRun.read_state(run_dir)
    if state is None:
        raise StructuralError(f"{run_dir} has no state.json; not a run directory")
    return [Snapshot(**rec) for rec in state.get("snapshots", [])]


def _find_snapshot(snapshots: list[Snapshot], stage_index: int) -> Snapshot:
    for snap in snapshots:
        if snap.stage_index == stage_index:
            if not Path(snap.checkpoint_path).exists():
                raise StructuralError(f"checkpoint missing: {snap.checkpoint_path}")
            return snap
    raise StructuralError(f"no snapshot for stage {stage_index}")


def cmd_preview(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = config_mod.load_config(run_dir / "config.json")
    cameras = config_mod.build_cameras(cfg)
    if not 0 <= args.view < len(cameras):
        raise StructuralError(f"view {args.view} outside 0..{len(cameras) - 1}")
    snap = _find_snapshot(_load_run_snapshots(run_dir), args.snapshot)
    image = preview(snap, cameras[args.view])
    save_png(image, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_export(args) -> int:
    run_dir = Path(args.run_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snap = _find_snapshot(_load_run_snapshots(run_dir), args.snapshot)
    src = Path(snap.checkpoint_path)
    dst = out_dir / src.name
    shutil.copyfile(src, dst)
    shutil.copyfile(sidecar_path(src), sidecar_path(dst))
    cloud, counters = load_cloud(dst)
    manifest = {
        "stage_index": snap.stage_index,
        "ratio": snap.ratio,
        "n_gaussians": cloud.size,
        "metrics": snap.metrics,
        "counters": counters,
        "files": [dst.name, sidecar_path(dst).name],
    }
    import json

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"exported stage {snap.stage_index} to {out_dir}")
    return 0


def cmd_report(args) -> int:
    from .report import generate_report

    out_dir = Path(args.out_dir) if args.out_dir else Path(args.run_dir) / "report"
    written = generate_report(args.run_dir, out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proedit",
        description="Progressive Gaussian-splat scene editing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="compute and print the subtask schedule")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".", help="directory for schedule.txt and caches")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("run", help="execute the full progressive edit")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="run", help="run directory")
    p.add_argument("--serve", default=None, help="host:port for the control API")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--resume", action="store_true")
    p.add_argument(
        "--linger",
        type=float,
        default=0.0,
        help="seconds to keep serving after the run finishes",
    )
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preview", help="render one snapshot from one view")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--snapshot", type=int, required=True, help="stage index")
    p.add_argument("--view", type=int, required=True)
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("export", help="copy a snapshot checkpoint with a manifest")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--snapshot", type=int, required=True, help="stage index")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("report", help="figures and CSV tables for a run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProeditError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
