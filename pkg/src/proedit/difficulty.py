"""Perceptual image distance and the subtask difficulty estimator.

Difficulty between two ratios is the summed perceptual distance between
full-strength edits of the original scene's views at those ratios. Both the
per-view edited images and the resulting scalar are memoized, so the
scheduler's repeated queries during bisection and pruning cost one edit per
(view, ratio) total.
"""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np

from .embedding import as_ratio
from .errors import StructuralError
from .image import require_image, require_same_resolution
from .ssim import multiscale_distance

VIEW_LIMIT = 16
RATIO_QUANTUM = 1e-6


def image_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Multi-scale structural dissimilarity in [0, 1]; 0 for identical images."""
    require_same_resolution(require_image(a), require_image(b))
    return multiscale_distance(a, b)


def select_views(n_views: int, limit: int = VIEW_LIMIT, seed: int = 0) -> list[int]:
    """View indices used by the difficulty sum: all, or a seeded subsample."""
    if n_views <= 0:
        raise StructuralError("need at least one view")
    if n_views <= limit:
        return list(range(n_views))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD1]))
    picked = rng.choice(n_views, size=limit, replace=False)
    return sorted(int(v) for v in picked)


def _quantize(r: float) -> int:
    return int(round(as_ratio(r) / RATIO_QUANTUM))


class DifficultyCache:
    """Symmetric memo of difficulty values and per-(view, ratio) edits.

    Keys are ratios quantized to 1e-6 so float noise from midpoint arithmetic
    cannot split entries. Safe for concurrent readers and writers.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._values: dict[tuple[int, int], float] = {}
        self._images: dict[tuple[int, int], np.ndarray] = {}

    @staticmethod
    def _key(r_a: float, r_b: float) -> tuple[int, int]:
        qa, qb = _quantize(r_a), _quantize(r_b)
        return (qa, qb) if qa <= qb else (qb, qa)

    def get(self, r_a: float, r_b: float):
        with self._lock:
            return self._values.get(self._key(r_a, r_b))

    def put(self, r_a: float, r_b: float, value: float) -> None:
        with self._lock:
            self._values[self._key(r_a, r_b)] = float(value)

    def edited_image(self, view_id: int, r: float, produce) -> np.ndarray:
        """Return the cached full-strength edit for (view, r), producing once."""
        key = (int(view_id), _quantize(r))
        with self._lock:
            hit = self._images.get(key)
        if hit is not None:
            return hit
        img = np.asarray(produce(), dtype=np.float64)
        require_image(img)
        img = img.copy()
        img.setflags(write=False)
        with self._lock:
            return self._images.setdefault(key, img)

    def __len__(self) -> int:
        with self._lock:
            return len(self._values)

    def items(self):
        with self._lock:
            entries = sorted(self._values.items())
        return [
            (qa * RATIO_QUANTUM, qb * RATIO_QUANTUM, d) for (qa, qb), d in entries
        ]

    def dump(self, path) -> Path:
        """Write the audit table: one `r_a r_b d` line per cached pair."""
        path = Path(path)
        lines = [f"{ra!r} {rb!r} {d!r}" for ra, rb, d in self.items()]
        path.write_text("\n".join(lines) + ("\n" if lines else ""))
        return path

    @classmethod
    def load(cls, path) -> "DifficultyCache":
        cache = cls()
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise StructuralError(f"{path}:{lineno}: expected `r_a r_b d`")
            cache.put(float(parts[0]), float(parts[1]), float(parts[2]))
        return cache


def difficulty(
    r_a: float,
    r_b: float,
    view_ids: list[int],
    task_output,
    metric=image_distance,
    cache: DifficultyCache | None = None,
) -> float:
    """Summed per-view perceptual distance between edits at two ratios.

    ``task_output(view_id, r)`` must return the full-strength edit of the
    original scene's render at that view; it must be deterministic while a
    decomposition is in flight.
    """
    r_a, r_b = as_ratio(r_a), as_ratio(r_b)
    if not view_ids:
        raise StructuralError("difficulty needs a non-empty view set")
    if cache is not None:
        hit = cache.get(r_a, r_b)
        if hit is not None:
            return hit
    if _quantize(r_a) == _quantize(r_b):
        total = 0.0
    else:
        total = 0.0
        for v in view_ids:
            if cache is not None:
                img_a = cache.edited_image(v, r_a, lambda: task_output(v, r_a))
                img_b = cache.edited_image(v, r_b, lambda: task_output(v, r_b))
            else:
                img_a = task_output(v, r_a)
                img_b = task_output(v, r_b)
            total += float(metric(img_a, img_b))
    if cache is not None:
        cache.put(r_a, r_b, total)
    return total


def make_oracle(
    view_ids: list[int],
    task_output,
    metric=image_distance,
    cache: DifficultyCache | None = None,
):
    """Bind difficulty's non-ratio arguments into an ``(a, b) -> d`` callable."""
    if cache is None:
        cache = DifficultyCache()

    def oracle(r_a: float, r_b: float) -> float:
        return difficulty(r_a, r_b, view_ids, task_output, metric, cache)

    oracle.cache = cache
    return oracle
