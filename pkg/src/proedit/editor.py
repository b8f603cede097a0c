"""2D editing oracles: a synthetic editor with a tunable feasible-output
space, and a client for an external editing service.

The synthetic editor stands in for a diffusion model. Its output for a view
is a strength-weighted blend of the input with a render of the
source-to-target parameter interpolation at ratio r, perturbed per view by a
fixed seeded offset whose magnitude grows with r. The per-view perturbation
is the whole trick: views disagree more as the task ratio rises, which is
exactly the inconsistency a real 2D editor exhibits on harder edits.
"""

from __future__ import annotations

import base64
import itertools
import threading
from dataclasses import dataclass, field

import numpy as np
import requests

from .camera import Camera
from .difficulty import image_distance
from .embedding import as_ratio
from .errors import EditAbortError, StructuralError, TransportError
from .image import from_png_bytes, require_image, to_png_bytes
from .splat import GaussianCloud, render

DEFAULT_GUIDANCE = 7.5 * 1.5
REMOTE_TIMEOUT = 30.0
REMOTE_ATTEMPTS = 3

STRENGTH_MAX_DEFAULT = 0.85
STRENGTH_MIN_DEFAULT = 0.45


def _require_strength(strength: float) -> float:
    strength = float(strength)
    if not 0.0 < strength <= 1.0:
        raise StructuralError(f"strength must be in (0, 1], got {strength!r}")
    return strength


@dataclass(frozen=True)
class StrengthSchedule:
    """Per-stage anneal from strong edits to gentle ones.

    beta(u) falls linearly from strength_max at u=0 to strength_min at u=1,
    restarting for every stage.
    """

    strength_max: float = STRENGTH_MAX_DEFAULT
    strength_min: float = STRENGTH_MIN_DEFAULT

    def __post_init__(self):
        _require_strength(self.strength_max)
        _require_strength(self.strength_min)
        if self.strength_min > self.strength_max:
            raise StructuralError("strength_min must not exceed strength_max")

    def at(self, progress: float) -> float:
        u = min(max(float(progress), 0.0), 1.0)
        return self.strength_max - (self.strength_max - self.strength_min) * u


@dataclass(frozen=True)
class SyntheticEditorConfig:
    source: GaussianCloud
    target: GaussianCloud
    cameras: tuple[Camera, ...]
    fos_scale: float = 0.0     # sigma_max, scene units
    fos_growth: float = 1.0    # exponent on r
    seed: int = 0

    def __post_init__(self):
        if self.source.size != self.target.size:
            raise StructuralError(
                "source and target clouds must have equal Gaussian counts"
            )
        if self.fos_scale < 0:
            raise StructuralError("fos_scale must be >= 0")
        if self.fos_growth <= 0:
            raise StructuralError("fos_growth must be > 0")
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if not self.cameras:
            raise StructuralError("editor needs at least one camera")

    def sigma(self, r: float) -> float:
        return self.fos_scale * as_ratio(r) ** self.fos_growth


def _lerp_cloud(source: GaussianCloud, target: GaussianCloud, r: float) -> GaussianCloud:
    out = GaussianCloud(
        means=(1 - r) * source.means + r * target.means,
        log_scales=(1 - r) * source.log_scales + r * target.log_scales,
        rotations=(1 - r) * source.rotations + r * target.rotations,
        opacity_logits=(1 - r) * source.opacity_logits + r * target.opacity_logits,
        colors=(1 - r) * source.colors + r * target.colors,
        scene_extent=max(source.scene_extent, target.scene_extent),
    )
    out.restore_invariants()
    return out


class SyntheticEditor:
    """Deterministic T_2D surrogate; stateless apart from cached view offsets."""

    def __init__(self, config: SyntheticEditorConfig, resample: bool = False):
        self.config = config
        self.resample = resample
        self._lock = threading.Lock()
        self._offsets: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._calls = itertools.count()

    def _unit_offsets(self, view_id: int):
        """Fixed per-view unit draws for means and colors, created lazily."""
        with self._lock:
            hit = self._offsets.get(view_id)
        if hit is not None:
            return hit
        rng = np.random.default_rng(
            np.random.SeedSequence([int(self.config.seed), int(view_id)])
        )
        n = self.config.source.size
        draws = (rng.standard_normal((n, 3)), rng.standard_normal((n, 3)))
        with self._lock:
            return self._offsets.setdefault(view_id, draws)

    def _camera(self, view_id: int) -> Camera:
        if not 0 <= view_id < len(self.config.cameras):
            raise StructuralError(f"unknown view id {view_id}")
        return self.config.cameras[view_id]

    def _perturbed(self, view_id: int, r: float) -> GaussianCloud:
        cloud = _lerp_cloud(self.config.source, self.config.target, r)
        sigma = self.config.sigma(r)
        if sigma > 0:
            if self.resample:
                rng = np.random.default_rng(
                    np.random.SeedSequence(
                        [int(self.config.seed), int(view_id), next(self._calls)]
                    )
                )
                mean_off = rng.standard_normal((cloud.size, 3))
                color_off = rng.standard_normal((cloud.size, 3))
            else:
                mean_off, color_off = self._unit_offsets(view_id)
            cloud.means = cloud.means + sigma * mean_off
            cloud.colors = np.clip(cloud.colors + sigma * color_off, 0.0, 1.0)
        return cloud

    def edit(self, image: np.ndarray, view_id: int, r: float, strength: float) -> np.ndarray:
        """Blend the input toward the (perturbed) interpolant render."""
        r = as_ratio(r)
        strength = _require_strength(strength)
        cam = self._camera(view_id)
        image = np.asarray(image, dtype=np.float64)
        require_image(image)
        if image.shape[:2] != (cam.height, cam.width):
            raise StructuralError("input resolution does not match the view's camera")
        edited = render(self._perturbed(view_id, r), cam).image
        out = (1.0 - strength) * image + strength * edited
        return np.clip(out, 0.0, 1.0)

    def ground_truth_render(self, view_id: int, r: float) -> np.ndarray:
        """Unperturbed render of the interpolant; evaluation only."""
        cam = self._camera(view_id)
        return render(_lerp_cloud(self.config.source, self.config.target, as_ratio(r)), cam).image

    def task_output(self, view_id: int, r: float) -> np.ndarray:
        """Full-strength edit of the original scene's view, for Eq.-style sums."""
        cam = self._camera(view_id)
        base = render(self.config.source, cam).image
        return self.edit(base, view_id, r, 1.0)


def fos_disagreement(
    editor: SyntheticEditor,
    r: float,
    view_ids: list[int] | None = None,
    metric=image_distance,
) -> float:
    """Mean pairwise distance between full-strength edits across views."""
    if view_ids is None:
        view_ids = list(range(len(editor.config.cameras)))
    if len(view_ids) < 2:
        raise StructuralError("cross-view disagreement needs at least two views")
    outputs = [
        editor.edit(editor.ground_truth_render(v, r), v, r, 1.0) for v in view_ids
    ]
    total, pairs = 0.0, 0
    for i in range(len(outputs)):
        for j in range(i + 1, len(outputs)):
            total += float(metric(outputs[i], outputs[j]))
            pairs += 1
    return total / pairs


class RemoteEditor:
    """Client for an external editor speaking the POST /edit protocol."""

    def __init__(
        self,
        endpoint: str,
        seed: int = 0,
        guidance: float = DEFAULT_GUIDANCE,
        timeout: float = REMOTE_TIMEOUT,
        attempts: int = REMOTE_ATTEMPTS,
        session=None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.seed = int(seed)
        self.guidance = float(guidance)
        self.timeout = float(timeout)
        self.attempts = int(attempts)
        self._session = session or requests.Session()

    def _attempt(self, payload: dict, shape) -> np.ndarray:
        try:
            resp = self._session.post(
                self.endpoint + "/edit", json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"editor request failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"editor returned HTTP {resp.status_code}")
        try:
            encoded = resp.json()["image"]
            out = from_png_bytes(base64.b64decode(encoded))
        except Exception as exc:
            raise TransportError(f"malformed editor response: {exc}") from exc
        if out.shape != shape:
            raise TransportError(
                f"editor returned resolution {out.shape[:2]}, expected {shape[:2]}"
            )
        return out

    def edit(self, image: np.ndarray, view_id: int, r: float, strength: float) -> np.ndarray:
        image = np.asarray(image, dtype=np.float64)
        require_image(image)
        payload = {
            "image": base64.b64encode(to_png_bytes(image)).decode("ascii"),
            "r": as_ratio(r),
            "strength": _require_strength(strength),
            "guidance": self.guidance,
            "seed": self.seed,
            "view_id": int(view_id),
        }
        last: TransportError | None = None
        for _ in range(self.attempts):
            try:
                return self._attempt(payload, image.shape)
            except TransportError as exc:
                last = exc
        raise EditAbortError(
            f"editor failed {self.attempts} consecutive attempts: {last}"
        ) from last
