"""Adaptive Gaussian maintenance.

Each stage starts by knocking every opacity down to the cull threshold, so
Gaussians that still explain the edited views relearn high opacity while
stale ones decay and get culled. Growth is budgeted: culled capacity is
refilled plus a small fraction of the cloud, hard-capped, which keeps the
count bounded no matter how inconsistent the training targets are. An
explicitly unbudgeted mode exists only to demonstrate the blow-up that the
budget prevents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CloudEmptiedError, StructuralError
from .splat import AdamState, GaussianCloud, logit, quat_to_rotmats

CULL_OPACITY_DEFAULT = 0.005
WARMUP_ITERS_DEFAULT = 300
INTERVAL_DEFAULT = 100
BUDGET_FRACTION_DEFAULT = 0.01
HARD_CAP_DEFAULT = 50_000
SPLIT_THRESHOLD_FACTOR = 0.01   # tau = factor * scene_extent
SPLIT_SHRINK = 1.6
DUPLICATE_JITTER_FACTOR = 1e-3  # times scene_extent


@dataclass(frozen=True)
class MaintenanceConfig:
    cull_opacity: float = CULL_OPACITY_DEFAULT
    reset_opacity: float | None = None          # defaults to cull_opacity
    warmup_iters: int = WARMUP_ITERS_DEFAULT
    interval: int = INTERVAL_DEFAULT
    budget_fraction: float = BUDGET_FRACTION_DEFAULT
    hard_cap: int = HARD_CAP_DEFAULT
    split_threshold_factor: float = SPLIT_THRESHOLD_FACTOR
    split_shrink: float = SPLIT_SHRINK
    unlimited: bool = False                     # contrast mode: no budget, no cap
    unlimited_grad_threshold: float = 1e-6      # score floor in unlimited mode

    def __post_init__(self):
        if not 0.0 < self.cull_opacity < 1.0:
            raise StructuralError("cull_opacity must be in (0, 1)")
        if self.reset_opacity is not None and not 0.0 < self.reset_opacity < 1.0:
            raise StructuralError("reset_opacity must be in (0, 1)")
        if self.budget_fraction < 0:
            raise StructuralError("budget_fraction must be >= 0")
        if self.warmup_iters < 0 or self.interval < 1:
            raise StructuralError("warmup_iters >= 0 and interval >= 1 required")
        if self.split_shrink <= 1.0:
            raise StructuralError("split_shrink must exceed 1")

    @property
    def effective_reset(self) -> float:
        return self.cull_opacity if self.reset_opacity is None else self.reset_opacity


@dataclass
class MaintenanceReport:
    n_culled: int
    n_created: int
    n_total_after: int
    budget_used: int
    performed: bool = True

    @classmethod
    def skipped(cls, n_total: int) -> "MaintenanceReport":
        return cls(0, 0, n_total, 0, performed=False)


def opacity_reset(cloud: GaussianCloud, cfg: MaintenanceConfig) -> None:
    """Set every opacity to the reset threshold (in logit space, exactly)."""
    cloud.opacity_logits[:] = logit(cfg.effective_reset)


def cull(
    cloud: GaussianCloud,
    cfg: MaintenanceConfig,
    opt_state: AdamState | None = None,
) -> int:
    """Remove every Gaussian whose opacity fell below the threshold."""
    keep = cloud.opacities() >= cfg.cull_opacity
    n_culled = int(np.count_nonzero(~keep))
    if n_culled == cloud.size:
        raise CloudEmptiedError("culling removed every Gaussian")
    if n_culled:
        cloud.keep(keep)
        if opt_state is not None:
            opt_state.keep(keep)
    return n_culled


def creation_budget(n_culled: int, n_total: int, cfg: MaintenanceConfig) -> int:
    """Replacement capacity plus a small proportional allowance, hard-capped."""
    if n_culled < 0 or n_total < 0:
        raise StructuralError("counts must be non-negative")
    raw = n_culled + math.ceil(cfg.budget_fraction * n_total)
    return max(0, min(raw, cfg.hard_cap - n_total))


def densify_scores(cloud: GaussianCloud) -> np.ndarray:
    """Mean positional gradient magnitude per observation; 0 when unobserved."""
    return np.divide(
        cloud.grad_accum,
        cloud.obs_count,
        out=np.zeros(cloud.size),
        where=cloud.obs_count > 0,
    )


def densify(
    cloud: GaussianCloud,
    budget: int,
    cfg: MaintenanceConfig,
    rng: np.random.Generator,
    opt_state: AdamState | None = None,
    score_floor: float = 0.0,
) -> int:
    """Split or duplicate the highest-scoring Gaussians, one child net each.

    Large Gaussians (max scale above tau) split in two along their principal
    axis with shrunk scales; small ones duplicate in place with a slight
    jitter. Stats reset for everything touched. Returns the net growth.
    """
    if budget < 0:
        raise StructuralError("budget must be >= 0")
    scores = densify_scores(cloud)
    eligible = np.nonzero(scores > max(score_floor, 0.0))[0]
    if budget == 0 or eligible.size == 0:
        return 0
    order = np.argsort(-scores[eligible], kind="stable")
    selected = eligible[order][: min(budget, eligible.size)]

    tau = cfg.split_threshold_factor * cloud.scene_extent
    scales = np.exp(cloud.log_scales[selected])
    widest = scales.max(axis=1)
    split_mask = widest > tau

    new_means, new_log_scales, new_rotations = [], [], []
    new_logits, new_colors = [], []
    remove = np.zeros(cloud.size, dtype=bool)

    split_ids = selected[split_mask]
    if split_ids.size:
        rot = quat_to_rotmats(
            cloud.rotations[split_ids]
            / np.linalg.norm(cloud.rotations[split_ids], axis=1, keepdims=True)
        )
        s = np.exp(cloud.log_scales[split_ids])
        axis_idx = np.argmax(s, axis=1)
        axes = rot[np.arange(split_ids.size), :, axis_idx]
        offsets = 0.5 * s[np.arange(split_ids.size), axis_idx][:, None] * axes
        child_scales = cloud.log_scales[split_ids] - math.log(cfg.split_shrink)
        for sign in (+1.0, -1.0):
            new_means.append(cloud.means[split_ids] + sign * offsets)
            new_log_scales.append(child_scales)
            new_rotations.append(cloud.rotations[split_ids])
            new_logits.append(cloud.opacity_logits[split_ids])
            new_colors.append(cloud.colors[split_ids])
        remove[split_ids] = True

    dup_ids = selected[~split_mask]
    if dup_ids.size:
        jitter = DUPLICATE_JITTER_FACTOR * cloud.scene_extent
        new_means.append(
            cloud.means[dup_ids] + jitter * rng.standard_normal((dup_ids.size, 3))
        )
        new_log_scales.append(cloud.log_scales[dup_ids])
        new_rotations.append(cloud.rotations[dup_ids])
        new_logits.append(cloud.opacity_logits[dup_ids])
        new_colors.append(cloud.colors[dup_ids])
        cloud.grad_accum[dup_ids] = 0.0
        cloud.obs_count[dup_ids] = 0.0

    n_before = cloud.size
    if np.any(remove):
        keep = ~remove
        cloud.keep(keep)
        if opt_state is not None:
            opt_state.keep(keep)
    if new_means:
        cloud.append(
            np.vstack(new_means),
            np.vstack(new_log_scales),
            np.vstack(new_rotations),
            np.concatenate(new_logits),
            np.vstack(new_colors),
        )
        if opt_state is not None:
            opt_state.append(cloud.size - (n_before - int(np.count_nonzero(remove))))
    return cloud.size - n_before


class Maintainer:
    """Owns the warmup gate and runs cull + budgeted densify on schedule."""

    def __init__(self, cfg: MaintenanceConfig):
        self.cfg = cfg
        self.warmup_left = 0

    def opacity_reset(self, cloud: GaussianCloud) -> None:
        opacity_reset(cloud, self.cfg)
        self.warmup_left = self.cfg.warmup_iters

    def tick(self, iters: int = 1) -> None:
        """Advance the warmup counter by completed training iterations."""
        self.warmup_left = max(0, self.warmup_left - iters)

    def due(self, iteration: int) -> bool:
        return iteration % self.cfg.interval == 0

    def maintain(
        self,
        cloud: GaussianCloud,
        rng: np.random.Generator,
        opt_state: AdamState | None = None,
    ) -> MaintenanceReport:
        if self.warmup_left > 0:
            return MaintenanceReport.skipped(cloud.size)
        n_culled = cull(cloud, self.cfg, opt_state)
        if self.cfg.unlimited:
            budget = cloud.size  # no cap: every above-floor Gaussian is processed
            n_created = densify(
                cloud,
                budget,
                self.cfg,
                rng,
                opt_state,
                score_floor=self.cfg.unlimited_grad_threshold,
            )
            budget_used = n_created
        else:
            budget = creation_budget(n_culled, cloud.size, self.cfg)
            n_created = densify(cloud, budget, self.cfg, rng, opt_state)
            budget_used = budget
        cloud.check_stats()
        return MaintenanceReport(
            n_culled=n_culled,
            n_created=n_created,
            n_total_after=cloud.size,
            budget_used=budget_used,
        )
