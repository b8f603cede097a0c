"""Desk-scale differentiable Gaussian splatting.

Gaussians are projected through a pinhole camera, composited front to back
over the full image, and trained with hand-derived analytic gradients for
every parameter. No tiling, no SH, no GPU: the renderer is small enough to
verify against finite differences and fast enough for scenes of a few
thousand Gaussians at preview resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .camera import Camera
from .errors import StructuralError, TrainingAbort
from .image import require_image, require_same_resolution
from .ssim import ssim_and_grad

NEAR_PLANE = 0.01
COV2D_DILATION = 0.3          # isotropic px^2 added to every projected covariance
TRANSMITTANCE_FLOOR = 1e-4    # stop compositing once every pixel is this opaque
SCALE_MIN = 1e-4
BACKGROUND = 1.0              # white

DEFAULT_LEARNING_RATES = {
    "means": 1.6e-4,          # scaled by scene_extent
    "log_scales": 5e-3,
    "rotations": 1e-3,
    "opacity_logits": 5e-2,
    "colors": 2.5e-3,
}

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PARAM_GROUPS = ("means", "log_scales", "rotations", "opacity_logits", "colors")


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


@dataclass(frozen=True)
class Gaussian:
    """A single splat, mainly a convenience view for tests and tools."""

    mean: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    opacity_logit: float
    color: np.ndarray

    @property
    def opacity(self) -> float:
        return float(expit(self.opacity_logit))


@dataclass
class GaussianCloud:
    """Structure-of-arrays cloud plus per-Gaussian maintenance statistics."""

    means: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    colors: np.ndarray
    scene_extent: float
    grad_accum: np.ndarray = None
    obs_count: np.ndarray = None

    def __post_init__(self):
        n = self.means.shape[0]
        self.means = np.array(self.means, dtype=np.float64).reshape(n, 3)
        self.log_scales = np.array(self.log_scales, dtype=np.float64).reshape(n, 3)
        self.rotations = np.array(self.rotations, dtype=np.float64).reshape(n, 4)
        self.opacity_logits = np.array(self.opacity_logits, dtype=np.float64).reshape(n)
        self.colors = np.array(self.colors, dtype=np.float64).reshape(n, 3)
        if self.grad_accum is None:
            self.grad_accum = np.zeros(n)
        if self.obs_count is None:
            self.obs_count = np.zeros(n)
        self.grad_accum = np.array(self.grad_accum, dtype=np.float64).reshape(n)
        self.obs_count = np.array(self.obs_count, dtype=np.float64).reshape(n)

    @property
    def size(self) -> int:
        return self.means.shape[0]

    def opacities(self) -> np.ndarray:
        return expit(self.opacity_logits)

    def gaussian(self, i: int) -> Gaussian:
        return Gaussian(
            mean=self.means[i].copy(),
            log_scale=self.log_scales[i].copy(),
            rotation=self.rotations[i].copy(),
            opacity_logit=float(self.opacity_logits[i]),
            color=self.colors[i].copy(),
        )

    def copy(self) -> "GaussianCloud":
        return GaussianCloud(
            means=self.means.copy(),
            log_scales=self.log_scales.copy(),
            rotations=self.rotations.copy(),
            opacity_logits=self.opacity_logits.copy(),
            colors=self.colors.copy(),
            scene_extent=self.scene_extent,
            grad_accum=self.grad_accum.copy(),
            obs_count=self.obs_count.copy(),
        )

    def restore_invariants(self) -> None:
        """Renormalize rotations, clamp scales to the scene, clamp colors."""
        norms = np.linalg.norm(self.rotations, axis=1, keepdims=True)
        bad = norms[:, 0] < 1e-12
        if np.any(bad):
            self.rotations[bad] = (1.0, 0.0, 0.0, 0.0)
            norms[bad] = 1.0
        # Leave already-unit rows untouched so the operation is idempotent at
        # the bit level; parameter interpolation relies on exact endpoints.
        off = np.abs(norms[:, 0] - 1.0) > 1e-12
        if np.any(off):
            self.rotations[off] /= norms[off]
        np.clip(
            self.log_scales,
            np.log(SCALE_MIN),
            np.log(self.scene_extent),
            out=self.log_scales,
        )
        np.clip(self.colors, 0.0, 1.0, out=self.colors)

    def check_stats(self) -> None:
        n = self.size
        if self.grad_accum.shape != (n,) or self.obs_count.shape != (n,):
            raise StructuralError("maintenance statistics out of sync with cloud size")
        if np.any(self.grad_accum < 0) or np.any(self.obs_count < 0):
            raise StructuralError("maintenance statistics must be non-negative")

    def keep(self, mask: np.ndarray) -> None:
        """Drop every Gaussian where ``mask`` is False, stats included."""
        for name in ("means", "log_scales", "rotations", "colors"):
            setattr(self, name, getattr(self, name)[mask])
        self.opacity_logits = self.opacity_logits[mask]
        self.grad_accum = self.grad_accum[mask]
        self.obs_count = self.obs_count[mask]

    def append(self, means, log_scales, rotations, opacity_logits, colors) -> None:
        k = np.asarray(means).reshape(-1, 3).shape[0]
        self.means = np.vstack([self.means, np.asarray(means, dtype=np.float64).reshape(k, 3)])
        self.log_scales = np.vstack(
            [self.log_scales, np.asarray(log_scales, dtype=np.float64).reshape(k, 3)]
        )
        self.rotations = np.vstack(
            [self.rotations, np.asarray(rotations, dtype=np.float64).reshape(k, 4)]
        )
        self.opacity_logits = np.concatenate(
            [self.opacity_logits, np.asarray(opacity_logits, dtype=np.float64).reshape(k)]
        )
        self.colors = np.vstack([self.colors, np.asarray(colors, dtype=np.float64).reshape(k, 3)])
        self.grad_accum = np.concatenate([self.grad_accum, np.zeros(k)])
        self.obs_count = np.concatenate([self.obs_count, np.zeros(k)])


def quat_to_rotmats(quats: np.ndarray) -> np.ndarray:
    """Rotation matrices for unit quaternions (w, x, y, z), vectorized."""
    w, x, y, z = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    out = np.empty((quats.shape[0], 3, 3))
    out[:, 0, 0] = 1 - 2 * (y * y + z * z)
    out[:, 0, 1] = 2 * (x * y - w * z)
    out[:, 0, 2] = 2 * (x * z + w * y)
    out[:, 1, 0] = 2 * (x * y + w * z)
    out[:, 1, 1] = 1 - 2 * (x * x + z * z)
    out[:, 1, 2] = 2 * (y * z - w * x)
    out[:, 2, 0] = 2 * (x * z - w * y)
    out[:, 2, 1] = 2 * (y * z + w * x)
    out[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def quat_rotation_partials(quats: np.ndarray) -> np.ndarray:
    """d(rotation matrix)/d(quaternion component): shape (N, 4, 3, 3)."""
    w, x, y, z = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    zero = np.zeros_like(w)
    p = np.empty((quats.shape[0], 4, 3, 3))
    p[:, 0] = 2 * np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )
    p[:, 1] = 2 * np.stack(
        [
            np.stack([zero, y, z], axis=-1),
            np.stack([y, -2 * x, -w], axis=-1),
            np.stack([z, w, -2 * x], axis=-1),
        ],
        axis=-2,
    )
    p[:, 2] = 2 * np.stack(
        [
            np.stack([-2 * y, x, w], axis=-1),
            np.stack([x, zero, z], axis=-1),
            np.stack([-w, z, -2 * y], axis=-1),
        ],
        axis=-2,
    )
    p[:, 3] = 2 * np.stack(
        [
            np.stack([-2 * z, -w, x], axis=-1),
            np.stack([w, -2 * z, y], axis=-1),
            np.stack([x, y, zero], axis=-1),
        ],
        axis=-2,
    )
    return p


@dataclass
class ProjectedCloud:
    """Everything the compositor and its gradients need, for visible splats."""

    indices: np.ndarray      # indices into the cloud, sorted front to back
    mean2d: np.ndarray       # (V, 2) pixel coordinates
    cov2d: np.ndarray        # (V, 2, 2) after dilation
    cov2d_inv: np.ndarray    # (V, 2, 2)
    depth: np.ndarray        # (V,)
    t_cam: np.ndarray        # (V, 3) camera-space means
    m_proj: np.ndarray       # (V, 2, 3) projection Jacobian times camera rotation
    j_proj: np.ndarray       # (V, 2, 3) projection Jacobian
    sigma3: np.ndarray       # (V, 3, 3) world-space covariances
    rotmats: np.ndarray      # (V, 3, 3)
    scales: np.ndarray       # (V, 3)
    quats_hat: np.ndarray    # (V, 4) normalized
    quat_norms: np.ndarray   # (V,) raw norms
    opacities: np.ndarray    # (V,)


def project_cloud(cloud: GaussianCloud, cam: Camera) -> ProjectedCloud:
    """Project every in-front Gaussian, sorted by depth (ties by index)."""
    t_cam = cloud.means @ cam.rotation.T + cam.translation
    in_front = t_cam[:, 2] > NEAR_PLANE
    idx = np.nonzero(in_front)[0]
    depth = t_cam[idx, 2]
    order = np.argsort(depth, kind="stable")
    idx = idx[order]

    t = t_cam[idx]
    x, y, z = t[:, 0], t[:, 1], t[:, 2]
    inv_z = 1.0 / z
    mean2d = np.stack([cam.fx * x * inv_z + cam.cx, cam.fy * y * inv_z + cam.cy], axis=1)

    norms = np.linalg.norm(cloud.rotations[idx], axis=1)
    qhat = cloud.rotations[idx] / norms[:, None]
    rot = quat_to_rotmats(qhat)
    scales = np.exp(cloud.log_scales[idx])
    b = rot * scales[:, None, :]
    sigma3 = b @ np.swapaxes(b, 1, 2)

    j = np.zeros((idx.size, 2, 3))
    j[:, 0, 0] = cam.fx * inv_z
    j[:, 0, 2] = -cam.fx * x * inv_z * inv_z
    j[:, 1, 1] = cam.fy * inv_z
    j[:, 1, 2] = -cam.fy * y * inv_z * inv_z
    m = j @ cam.rotation
    cov2d = m @ sigma3 @ np.swapaxes(m, 1, 2)
    cov2d[:, 0, 0] += COV2D_DILATION
    cov2d[:, 1, 1] += COV2D_DILATION

    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    inv = np.empty_like(cov2d)
    inv[:, 0, 0] = cov2d[:, 1, 1]
    inv[:, 1, 1] = cov2d[:, 0, 0]
    inv[:, 0, 1] = -cov2d[:, 0, 1]
    inv[:, 1, 0] = -cov2d[:, 1, 0]
    inv /= det[:, None, None]

    return ProjectedCloud(
        indices=idx,
        mean2d=mean2d,
        cov2d=cov2d,
        cov2d_inv=inv,
        depth=t[:, 2],
        t_cam=t,
        m_proj=m,
        j_proj=j,
        sigma3=sigma3,
        rotmats=rot,
        scales=scales,
        quats_hat=qhat,
        quat_norms=norms,
        opacities=expit(cloud.opacity_logits[idx]),
    )


def project(g: Gaussian, cam: Camera):
    """Project a single Gaussian; returns None when it is behind the camera.

    Result is a dict with ``mean2d`` (pixels), ``cov2d`` (2x2, dilated), and
    ``depth``.
    """
    cloud = GaussianCloud(
        means=g.mean[None, :],
        log_scales=g.log_scale[None, :],
        rotations=g.rotation[None, :],
        opacity_logits=np.array([g.opacity_logit]),
        colors=g.color[None, :],
        scene_extent=1.0,
    )
    proj = project_cloud(cloud, cam)
    if proj.indices.size == 0:
        return None
    return {"mean2d": proj.mean2d[0], "cov2d": proj.cov2d[0], "depth": float(proj.depth[0])}


@dataclass
class RenderOutput:
    image: np.ndarray                 # (H, W, 3) in [0, 1]
    per_gaussian_weight: np.ndarray   # (N,) summed compositing weight
    transmittance: np.ndarray         # (H, W) background weight
    weight_total: np.ndarray          # (H, W) sum of compositing weights


def _pixel_grid(cam: Camera):
    xs = np.arange(cam.width, dtype=np.float64)
    ys = np.arange(cam.height, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    return gx.ravel(), gy.ravel()


def _alpha_map(proj: ProjectedCloud, k: int, px: np.ndarray, py: np.ndarray):
    dx = px - proj.mean2d[k, 0]
    dy = py - proj.mean2d[k, 1]
    a = proj.cov2d_inv[k]
    q = a[0, 0] * dx * dx + 2.0 * a[0, 1] * dx * dy + a[1, 1] * dy * dy
    alpha = proj.opacities[k] * np.exp(-0.5 * q)
    # Opacity is strictly below 1, but guard against float rounding anyway.
    return np.minimum(alpha, 1.0 - 1e-12), dx, dy


def render(cloud: GaussianCloud, cam: Camera) -> RenderOutput:
    """Front-to-back alpha compositing over a white background.

    The output is independent of the input list order; compositing stops once
    every pixel's remaining transmittance falls below the floor.
    """
    proj = project_cloud(cloud, cam)
    px, py = _pixel_grid(cam)
    npix = px.size
    color_acc = np.zeros((npix, 3))
    transmittance = np.ones(npix)
    weights = np.zeros(cloud.size)

    for k in range(proj.indices.size):
        if transmittance.max() < TRANSMITTANCE_FLOOR:
            break
        alpha, _, _ = _alpha_map(proj, k, px, py)
        w = transmittance * alpha
        color_acc += w[:, None] * cloud.colors[proj.indices[k]][None, :]
        weights[proj.indices[k]] = w.sum()
        transmittance = transmittance * (1.0 - alpha)

    weight_total = 1.0 - transmittance
    image = color_acc + transmittance[:, None] * BACKGROUND
    shape = (cam.height, cam.width)
    return RenderOutput(
        image=image.reshape(shape + (3,)),
        per_gaussian_weight=weights,
        transmittance=transmittance.reshape(shape),
        weight_total=weight_total.reshape(shape),
    )


@dataclass
class Gradients:
    means: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    colors: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "Gradients":
        return cls(
            means=np.zeros((n, 3)),
            log_scales=np.zeros((n, 3)),
            rotations=np.zeros((n, 4)),
            opacity_logits=np.zeros(n),
            colors=np.zeros((n, 3)),
        )


def backward(
    cloud: GaussianCloud,
    cam: Camera,
    grad_image: np.ndarray,
    update_stats: bool = True,
) -> Gradients:
    """Analytic gradients of ``sum(grad_image * render(cloud, cam).image)``.

    Also accumulates per-Gaussian positional gradient norms into
    ``grad_accum`` and bumps ``obs_count`` for every Gaussian that contributed
    compositing weight, which is what densification ranks on.
    """
    grad_image = np.asarray(grad_image, dtype=np.float64)
    require_image(grad_image)
    if grad_image.shape[:2] != (cam.height, cam.width):
        raise StructuralError("grad_image resolution does not match the camera")
    if not np.all(np.isfinite(grad_image)):
        raise StructuralError("grad_image must be finite")
    g_flat = grad_image.reshape(-1, 3)

    proj = project_cloud(cloud, cam)
    px, py = _pixel_grid(cam)
    npix = px.size

    # Forward replay, keeping per-Gaussian alpha and entry transmittance.
    alphas = []
    t_before = []
    transmittance = np.ones(npix)
    processed = 0
    for k in range(proj.indices.size):
        if transmittance.max() < TRANSMITTANCE_FLOOR:
            break
        alpha, _, _ = _alpha_map(proj, k, px, py)
        alphas.append(alpha)
        t_before.append(transmittance)
        transmittance = transmittance * (1.0 - alpha)
        processed += 1

    grads = Gradients.zeros(cloud.size)
    if processed == 0:
        return grads

    nv = processed
    d_color = np.zeros((nv, 3))
    d_opacity = np.zeros(nv)
    d_mean2d = np.zeros((nv, 2))
    d_amat = np.zeros((nv, 2, 2))
    weight_sums = np.zeros(nv)

    # Back-to-front sweep; suffix holds the color contribution of everything
    # behind the current Gaussian, background included.
    suffix = transmittance[:, None] * BACKGROUND * np.ones((npix, 3))
    for k in range(nv - 1, -1, -1):
        alpha = alphas[k]
        t_in = t_before[k]
        color = cloud.colors[proj.indices[k]]
        w = t_in * alpha
        weight_sums[k] = w.sum()
        d_color[k] = g_flat.T @ w
        d_alpha = (g_flat * (t_in[:, None] * color[None, :] - suffix / (1.0 - alpha)[:, None])).sum(
            axis=1
        )
        d_opacity[k] = float(np.dot(d_alpha, alpha)) / proj.opacities[k]
        d_q = -0.5 * d_alpha * alpha
        dx = px - proj.mean2d[k, 0]
        dy = py - proj.mean2d[k, 1]
        sqx = float(np.dot(d_q, dx))
        sqy = float(np.dot(d_q, dy))
        a = proj.cov2d_inv[k]
        d_mean2d[k, 0] = -2.0 * (a[0, 0] * sqx + a[0, 1] * sqy)
        d_mean2d[k, 1] = -2.0 * (a[0, 1] * sqx + a[1, 1] * sqy)
        d_amat[k, 0, 0] = np.dot(d_q, dx * dx)
        d_amat[k, 0, 1] = d_amat[k, 1, 0] = np.dot(d_q, dx * dy)
        d_amat[k, 1, 1] = np.dot(d_q, dy * dy)
        suffix += w[:, None] * color[None, :]

    # Chain from 2D quantities to the 3D parameters, vectorized over splats.
    ainv = proj.cov2d_inv[:nv]
    d_cov2d = -ainv @ d_amat @ ainv
    m = proj.m_proj[:nv]
    sigma3 = proj.sigma3[:nv]
    d_m = 2.0 * d_cov2d @ m @ sigma3
    d_sigma3 = np.swapaxes(m, 1, 2) @ d_cov2d @ m
    d_j = d_m @ cam.rotation.T

    t = proj.t_cam[:nv]
    x, y, z = t[:, 0], t[:, 1], t[:, 2]
    inv_z = 1.0 / z
    inv_z2 = inv_z * inv_z
    fx, fy = cam.fx, cam.fy
    gx = d_j[:, 0, 2] * (-fx * inv_z2) + d_mean2d[:, 0] * fx * inv_z
    gy = d_j[:, 1, 2] * (-fy * inv_z2) + d_mean2d[:, 1] * fy * inv_z
    gz = (
        d_j[:, 0, 0] * (-fx * inv_z2)
        + d_j[:, 0, 2] * (2.0 * fx * x * inv_z2 * inv_z)
        + d_j[:, 1, 1] * (-fy * inv_z2)
        + d_j[:, 1, 2] * (2.0 * fy * y * inv_z2 * inv_z)
        + d_mean2d[:, 0] * (-fx * x * inv_z2)
        + d_mean2d[:, 1] * (-fy * y * inv_z2)
    )
    d_tcam = np.stack([gx, gy, gz], axis=1)
    d_means = d_tcam @ cam.rotation

    rot = proj.rotmats[:nv]
    scales = proj.scales[:nv]
    b = rot * scales[:, None, :]
    d_b = 2.0 * d_sigma3 @ b
    d_scales = np.einsum("nik,nik->nk", rot, d_b)
    d_log_scales = d_scales * scales
    d_rotmat = d_b * scales[:, None, :]
    partials = quat_rotation_partials(proj.quats_hat[:nv])
    d_qhat = np.einsum("nij,naij->na", d_rotmat, partials)
    qhat = proj.quats_hat[:nv]
    d_quats = (d_qhat - np.sum(d_qhat * qhat, axis=1, keepdims=True) * qhat) / proj.quat_norms[
        :nv, None
    ]

    ops = proj.opacities[:nv]
    d_logits = d_opacity * ops * (1.0 - ops)

    idx = proj.indices[:nv]
    grads.means[idx] = d_means
    grads.log_scales[idx] = d_log_scales
    grads.rotations[idx] = d_quats
    grads.opacity_logits[idx] = d_logits
    grads.colors[idx] = d_color

    if update_stats:
        contributing = weight_sums > 0.0
        cidx = idx[contributing]
        cloud.grad_accum[cidx] += np.linalg.norm(d_means[contributing], axis=1)
        cloud.obs_count[cidx] += 1.0
    return grads


class AdamState:
    """First and second moment buffers per parameter group, resizable."""

    def __init__(self, cloud: GaussianCloud):
        shapes = {
            "means": (cloud.size, 3),
            "log_scales": (cloud.size, 3),
            "rotations": (cloud.size, 4),
            "opacity_logits": (cloud.size,),
            "colors": (cloud.size, 3),
        }
        self.m = {k: np.zeros(v) for k, v in shapes.items()}
        self.v = {k: np.zeros(v) for k, v in shapes.items()}
        self.step = 0

    def keep(self, mask: np.ndarray) -> None:
        for k in self.m:
            self.m[k] = self.m[k][mask]
            self.v[k] = self.v[k][mask]

    def append(self, count: int) -> None:
        for k in self.m:
            extra = (count,) + self.m[k].shape[1:]
            self.m[k] = np.concatenate([self.m[k], np.zeros(extra)])
            self.v[k] = np.concatenate([self.v[k], np.zeros(extra)])


@dataclass
class LossConfig:
    l1_weight: float = 0.8
    ssim_weight: float = 0.2


def apply_adam(cloud: GaussianCloud, grads: Gradients, state: AdamState, lrs=None) -> None:
    lrs = dict(DEFAULT_LEARNING_RATES if lrs is None else lrs)
    lrs["means"] = lrs["means"] * cloud.scene_extent
    state.step += 1
    t = state.step
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for name in PARAM_GROUPS:
        g = getattr(grads, name)
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        update = lrs[name] * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        getattr(cloud, name).__isub__(update)


def image_loss(rendered: np.ndarray, target: np.ndarray, cfg: LossConfig = LossConfig()):
    """Weighted L1 + structural loss and its gradient w.r.t. the render."""
    require_same_resolution(require_image(rendered), require_image(target))
    diff = rendered - target
    l1 = float(np.mean(np.abs(diff)))
    s, ds = ssim_and_grad(rendered, target)
    loss = cfg.l1_weight * l1 + cfg.ssim_weight * (1.0 - s)
    grad = cfg.l1_weight * np.sign(diff) / diff.size - cfg.ssim_weight * ds
    return loss, grad


def train_step(
    cloud: GaussianCloud,
    target: np.ndarray,
    cam: Camera,
    opt_state: AdamState,
    loss_cfg: LossConfig = LossConfig(),
    lrs=None,
) -> float:
    """One supervised step on a full image; restores cloud invariants after."""
    target = np.asarray(target, dtype=np.float64)
    require_image(target)
    if target.shape[:2] != (cam.height, cam.width):
        raise StructuralError("target resolution does not match the camera")
    out = render(cloud, cam)
    loss, grad_image = image_loss(out.image, target, loss_cfg)
    if not np.isfinite(loss):
        raise TrainingAbort(f"non-finite training loss: {loss!r}")
    grads = backward(cloud, cam, grad_image)
    apply_adam(cloud, grads, opt_state, lrs)
    cloud.restore_invariants()
    return loss
