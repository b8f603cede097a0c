"""Run configuration: one JSON file drives decomposition and runs.

Everything a run needs is explicit in the file; the only environment hook is
PROEDIT_SEED, which overrides the seed for reproducibility sweeps.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .adaptive import MaintenanceConfig
from .camera import Camera
from .checkpoint import load_cloud
from .editor import RemoteEditor, StrengthSchedule, SyntheticEditor, SyntheticEditorConfig
from .errors import StructuralError
from .scenes import SCENE_NAMES, make_scene_pair, training_views
from .splat import GaussianCloud

SEED_ENV_VAR = "PROEDIT_SEED"


@dataclass(frozen=True)
class RunConfig:
    # scene
    scene: str = "texture"              # "texture" | "geometry" | "custom"
    source_ply: str | None = None       # required for scene == "custom"
    target_ply: str | None = None
    scene_size: int = 160
    scene_seed: int = 7
    # views
    n_views: int = 8
    orbit_radius: float = 4.0
    orbit_elevation_deg: float = 20.0
    fov_deg: float = 50.0
    width: int = 64
    height: int = 64
    # schedule
    threshold: float | None = None
    preset: str | None = "texture"      # exactly one of threshold/preset
    # editor
    editor: str = "synthetic"           # "synthetic" or an http(s) endpoint
    fos_scale: float = 0.0
    fos_growth: float = 1.0
    strength_max: float = 0.85
    strength_min: float = 0.45
    edit_source: str = "current_renders"
    embeddings_path: str | None = None
    embedding_dim: int = 16
    # reproducibility
    seed: int = 0
    deterministic: bool = False
    # training
    max_iters_per_stage: int = 4000
    window: int = 200
    patience: int = 400
    rel_tolerance: float = 1e-4
    interleave_k: int = 20
    concurrent: bool = False
    # maintenance
    warmup_iters: int = 300
    maintenance_interval: int = 100
    budget_fraction: float = 0.01
    hard_cap: int = 50_000
    # service
    serve: str | None = None            # "host:port"

    def validate(self) -> "RunConfig":
        if self.scene not in SCENE_NAMES + ("custom",):
            raise StructuralError(f"unknown scene {self.scene!r}")
        if self.scene == "custom" and not (self.source_ply and self.target_ply):
            raise StructuralError("custom scene requires source_ply and target_ply")
        if self.width < 32 or self.height < 32:
            raise StructuralError("resolution must be at least 32x32")
        if self.n_views < 2:
            raise StructuralError("need at least 2 views")
        if (self.threshold is None) == (self.preset is None):
            raise StructuralError("set exactly one of threshold or preset")
        if self.threshold is not None and self.threshold <= 0:
            raise StructuralError("threshold must be positive")
        if self.editor != "synthetic" and not self.editor.startswith(("http://", "https://")):
            raise StructuralError("editor must be 'synthetic' or an http(s) endpoint")
        if self.edit_source not in ("current_renders", "original_captures"):
            raise StructuralError(f"unknown edit_source {self.edit_source!r}")
        return self


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(dataclasses.asdict(cfg), indent=2, sort_keys=True) + "\n"


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise StructuralError("config root must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise StructuralError(f"unknown config keys: {', '.join(unknown)}")
    return RunConfig(**data).validate()


def save_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(serialize_config(cfg))
    tmp.replace(path)
    return path


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def apply_env_seed(cfg: RunConfig, environ=os.environ) -> RunConfig:
    raw = environ.get(SEED_ENV_VAR)
    if raw is None:
        return cfg
    try:
        seed = int(raw)
    except ValueError as exc:
        raise StructuralError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
    return dataclasses.replace(cfg, seed=seed)


def build_cameras(cfg: RunConfig) -> list[Camera]:
    return training_views(
        cfg.n_views,
        width=cfg.width,
        height=cfg.height,
        radius=cfg.orbit_radius,
        elevation_deg=cfg.orbit_elevation_deg,
        fov_deg=cfg.fov_deg,
    )


def build_scene(cfg: RunConfig) -> tuple[GaussianCloud, GaussianCloud]:
    if cfg.scene == "custom":
        source, _ = load_cloud(cfg.source_ply)
        target, _ = load_cloud(cfg.target_ply)
        if source.size != target.size:
            raise StructuralError("custom source and target clouds differ in size")
        return source, target
    return make_scene_pair(cfg.scene, n=cfg.scene_size, seed=cfg.scene_seed)


def build_editor(cfg: RunConfig, source, target, cameras):
    if cfg.editor == "synthetic":
        return SyntheticEditor(
            SyntheticEditorConfig(
                source=source,
                target=target,
                cameras=tuple(cameras),
                fos_scale=cfg.fos_scale,
                fos_growth=cfg.fos_growth,
                seed=cfg.seed,
            )
        )
    return RemoteEditor(cfg.editor, seed=cfg.seed)


def build_strength(cfg: RunConfig) -> StrengthSchedule:
    return StrengthSchedule(strength_max=cfg.strength_max, strength_min=cfg.strength_min)


def build_maintenance(cfg: RunConfig) -> MaintenanceConfig:
    return MaintenanceConfig(
        warmup_iters=cfg.warmup_iters,
        interval=cfg.maintenance_interval,
        budget_fraction=cfg.budget_fraction,
        hard_cap=cfg.hard_cap,
    )
