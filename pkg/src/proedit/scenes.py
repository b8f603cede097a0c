"""Synthetic benchmark scenes.

All tests and examples run on seeded Gaussian clusters built here: a source
cloud plus an edit target of equal cardinality so clouds interpolate
parameter-wise. The texture pair recolors in place; the geometry pair moves,
rotates, and squashes the cluster, which is the hard case for a single-shot
edit.
"""

from __future__ import annotations

import math

import numpy as np

from .camera import Camera, orbit_cameras
from .errors import StructuralError
from .splat import GaussianCloud, logit

SCENE_EXTENT = 2.5
DEFAULT_SCENE_SIZE = 160
DEFAULT_SCENE_SEED = 7

SCENE_NAMES = ("texture", "geometry")


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tag)]))


def cluster_cloud(
    n: int = DEFAULT_SCENE_SIZE,
    seed: int = DEFAULT_SCENE_SEED,
    extent: float = SCENE_EXTENT,
) -> GaussianCloud:
    """A colorful blob of Gaussians around the origin."""
    if n < 1:
        raise StructuralError("scene needs at least one Gaussian")
    rng = _rng(seed, 0x5C)
    means = rng.normal(0.0, 0.55, (n, 3))
    # Headroom on both sides keeps later tint shifts clip-free.
    colors = rng.uniform(0.15, 0.85, (n, 3))
    quats = rng.normal(0.0, 1.0, (n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    quats[quats[:, 0] < 0] *= -1.0
    cloud = GaussianCloud(
        means=means,
        log_scales=np.log(rng.uniform(0.07, 0.16, (n, 3))),
        rotations=quats,
        opacity_logits=logit(rng.uniform(0.6, 0.9, n)),
        colors=np.clip(colors, 0.0, 1.0),
        scene_extent=extent,
    )
    cloud.restore_invariants()
    return cloud


def _quat_multiply(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Hamilton product q*p for (w, x, y, z) rows."""
    w1, x1, y1, z1 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    w2, x2, y2, z2 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


# Strong warm retint; constant shifts preserve palette contrast, so view
# overlap statistics stay comparable along the whole interpolation path.
TEXTURE_SHIFT = np.array([0.14, -0.14, 0.11])


def texture_pair(
    n: int = DEFAULT_SCENE_SIZE, seed: int = DEFAULT_SCENE_SEED
) -> tuple[GaussianCloud, GaussianCloud]:
    """Same geometry, uniformly retinted colors."""
    source = cluster_cloud(n, seed)
    target = source.copy()
    target.colors = np.clip(source.colors + TEXTURE_SHIFT, 0.0, 1.0)
    return source, target


def geometry_pair(
    n: int = DEFAULT_SCENE_SIZE, seed: int = DEFAULT_SCENE_SEED
) -> tuple[GaussianCloud, GaussianCloud]:
    """Cluster moved, rotated about y, and squashed, with a mild recolor."""
    source = cluster_cloud(n, seed)
    target = source.copy()
    angle = math.radians(55.0)
    rot_y = np.array(
        [
            [math.cos(angle), 0.0, math.sin(angle)],
            [0.0, 1.0, 0.0],
            [-math.sin(angle), 0.0, math.cos(angle)],
        ]
    )
    squash = np.diag([1.15, 0.6, 1.0])
    shift = np.array([0.6, 0.18, -0.3])
    target.means = (source.means @ squash.T) @ rot_y.T + shift

    q_rot = np.array([math.cos(angle / 2), 0.0, math.sin(angle / 2), 0.0])
    rotated = _quat_multiply(np.broadcast_to(q_rot, (n, 4)), source.rotations)
    flip = np.sum(rotated * source.rotations, axis=1) < 0
    rotated[flip] *= -1.0
    target.rotations = rotated
    target.log_scales = source.log_scales + math.log(0.85)
    target.colors = np.clip(0.15 + 0.8 * source.colors[:, [2, 0, 1]], 0.0, 1.0)
    target.restore_invariants()
    return source, target


def make_scene_pair(
    name: str, n: int = DEFAULT_SCENE_SIZE, seed: int = DEFAULT_SCENE_SEED
) -> tuple[GaussianCloud, GaussianCloud]:
    if name == "texture":
        return texture_pair(n, seed)
    if name == "geometry":
        return geometry_pair(n, seed)
    raise StructuralError(f"unknown scene {name!r}; expected one of {SCENE_NAMES}")


def perturbed_copy(
    cloud: GaussianCloud,
    seed: int,
    pos_sigma: float = 0.075,
    scale_sigma: float = 0.1,
    color_sigma: float = 0.05,
    logit_sigma: float = 0.3,
    quat_sigma: float = 0.05,
) -> GaussianCloud:
    """Jittered copy of a cloud, the starting point for reconstruction tests."""
    rng = _rng(seed, 0x9E)
    out = cloud.copy()
    out.means = out.means + rng.normal(0.0, pos_sigma, out.means.shape)
    out.log_scales = out.log_scales + rng.normal(0.0, scale_sigma, out.log_scales.shape)
    out.colors = out.colors + rng.normal(0.0, color_sigma, out.colors.shape)
    out.opacity_logits = out.opacity_logits + rng.normal(0.0, logit_sigma, out.size)
    out.rotations = out.rotations + rng.normal(0.0, quat_sigma, out.rotations.shape)
    out.grad_accum[:] = 0.0
    out.obs_count[:] = 0.0
    out.restore_invariants()
    return out


def training_views(
    n_views: int = 8,
    width: int = 64,
    height: int = 64,
    radius: float = 4.0,
    elevation_deg: float = 20.0,
    fov_deg: float = 50.0,
) -> list[Camera]:
    return orbit_cameras(
        n_views,
        radius=radius,
        elevation_deg=elevation_deg,
        width=width,
        height=height,
        fov_deg=fov_deg,
    )


def held_out_camera(
    width: int = 64,
    height: int = 64,
    radius: float = 4.0,
    fov_deg: float = 50.0,
) -> Camera:
    """A viewpoint between orbit stations at a different elevation."""
    elevation = math.radians(33.0)
    azimuth = 2.0 * math.pi * 0.53
    eye = np.array(
        [
            radius * math.cos(elevation) * math.cos(azimuth),
            radius * math.sin(elevation),
            radius * math.cos(elevation) * math.sin(azimuth),
        ]
    )
    return Camera.look_at(
        eye=eye,
        target=np.zeros(3),
        up=np.array([0.0, 1.0, 0.0]),
        fov_deg=fov_deg,
        width=width,
        height=height,
    )
