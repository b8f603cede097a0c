"""Shared edit buffer: one last-write-wins slot per training view.

The producer overwrites slots with freshly edited images; the trainer reads
whatever is newest. Readers never see a torn image because a slot swap is a
single reference assignment of an immutable record under the slot's lock.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .embedding import as_ratio
from .errors import StructuralError
from .image import require_image


@dataclass(frozen=True)
class SlotRecord:
    image: np.ndarray        # read-only view; do not mutate
    version: int             # 1-based, strictly increasing per slot
    produced_at_ratio: float


class EditBuffer:
    def __init__(self, n_views: int):
        if n_views < 1:
            raise StructuralError("buffer needs at least one view slot")
        self.n_views = int(n_views)
        self._locks = [threading.Lock() for _ in range(self.n_views)]
        self._slots: list[SlotRecord | None] = [None] * self.n_views

    def _check_view(self, view_id: int) -> int:
        view_id = int(view_id)
        if not 0 <= view_id < self.n_views:
            raise StructuralError(f"view id {view_id} out of range 0..{self.n_views - 1}")
        return view_id

    def write(self, view_id: int, image: np.ndarray, ratio: float) -> int:
        """Replace the slot's contents; returns the new version number."""
        view_id = self._check_view(view_id)
        ratio = as_ratio(ratio)
        image = np.array(require_image(image), dtype=np.float64)
        image.setflags(write=False)
        with self._locks[view_id]:
            prev = self._slots[view_id]
            version = 1 if prev is None else prev.version + 1
            self._slots[view_id] = SlotRecord(image, version, ratio)
        return version

    def read(self, view_id: int) -> SlotRecord | None:
        """Latest record for the view, or None when nothing was written yet."""
        view_id = self._check_view(view_id)
        with self._locks[view_id]:
            return self._slots[view_id]

    def versions(self) -> list[int]:
        """Per-slot version counters; 0 marks a never-written slot."""
        out = []
        for view_id in range(self.n_views):
            with self._locks[view_id]:
                rec = self._slots[view_id]
            out.append(0 if rec is None else rec.version)
        return out

    def ready_views(self) -> list[int]:
        return [v for v, version in enumerate(self.versions()) if version > 0]
