"""Difficulty-aware subtask scheduling and convergence detection.

Decomposition bisects [0, 1] until every interval's difficulty clears the
threshold, pruning then removes interior ratios whose merged interval would
still clear it. A finalized schedule brackets the subtasks with two refine
stages: one re-reconstruction at r=0 before editing starts, one
consolidation at r=1 after the last subtask.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import as_ratio
from .errors import DecompositionError, StructuralError, TrainingAbort

MIN_WIDTH = 2.0 ** -6
MAX_SUBTASKS = 64

PRESET_TARGETS = {"texture": 4, "geometry": 8}

WINDOW_DEFAULT = 200
PATIENCE_DEFAULT = 400
REL_TOLERANCE_DEFAULT = 1e-4


def decompose(
    oracle,
    threshold: float,
    min_width: float = MIN_WIDTH,
    max_subtasks: int = MAX_SUBTASKS,
    lo: float = 0.0,
    hi: float = 1.0,
) -> tuple[list[float], bool]:
    """Recursive midpoint bisection of [lo, hi] against a difficulty oracle.

    Returns the sorted ratio list (endpoints included) and whether every
    interval actually met the threshold; hitting the width floor leaves an
    over-threshold interval behind and flips the flag instead of looping
    forever on a discontinuous oracle.
    """
    if threshold <= 0:
        raise StructuralError("threshold must be positive")
    lo, hi = as_ratio(lo), as_ratio(hi)
    if hi <= lo:
        raise StructuralError("empty decomposition interval")
    ratios = {lo, hi}
    threshold_met = True
    stack = [(lo, hi)]
    while stack:
        a, b = stack.pop()
        if oracle(a, b) <= threshold:
            continue
        if (b - a) <= min_width:
            threshold_met = False
            continue
        mid = 0.5 * (a + b)
        ratios.add(mid)
        if len(ratios) - 1 > max_subtasks:
            raise DecompositionError(
                f"over {max_subtasks} subtasks while splitting [{a:g}, {b:g}]"
            )
        stack.append((mid, b))
        stack.append((a, mid))
    return sorted(ratios), threshold_met


def prune(ratios: list[float], oracle, threshold: float) -> list[float]:
    """Remove interior ratios while some merged interval clears the threshold.

    Each pass removes the candidate with the smallest merged difficulty (ties
    to the lowest index), which makes the fixed point deterministic.
    """
    out = list(ratios)
    if len(out) < 2 or out[0] != min(out) or out != sorted(out):
        raise StructuralError("prune expects a sorted ratio list")
    while len(out) > 2:
        candidates = [
            (oracle(out[i - 1], out[i + 1]), i) for i in range(1, len(out) - 1)
        ]
        removable = [(d, i) for d, i in candidates if d <= threshold]
        if not removable:
            break
        _, idx = min(removable)
        del out[idx]
    return out


@dataclass
class Stage:
    index: int
    ratio: float
    kind: str  # "refine" or "subtask"


@dataclass
class Schedule:
    """Sorted subtask ratios plus the refine stages that bracket them."""

    ratios: list[float]
    threshold: float
    difficulties: list[float]
    prepend_refine: bool = True
    append_refine: bool = True
    threshold_met: bool = True

    def __post_init__(self):
        self.ratios = [as_ratio(r) for r in self.ratios]
        if len(self.ratios) < 2:
            raise StructuralError("a schedule needs at least ratios 0 and 1")
        if self.ratios != sorted(set(self.ratios)):
            raise StructuralError("schedule ratios must be strictly increasing")
        if self.ratios[0] != 0.0 or self.ratios[-1] != 1.0:
            raise StructuralError("schedule ratios must span exactly [0, 1]")
        if len(self.difficulties) != len(self.ratios) - 1:
            raise StructuralError("one difficulty per consecutive ratio pair")

    @property
    def subtask_count(self) -> int:
        return len(self.ratios) - 1

    def stages(self) -> list[Stage]:
        """Execution order: optional refine at 0, subtasks, optional refine at 1."""
        out = []
        if self.prepend_refine:
            out.append(Stage(len(out), 0.0, "refine"))
        for r in self.ratios[1:]:
            out.append(Stage(len(out), r, "subtask"))
        if self.append_refine:
            out.append(Stage(len(out), 1.0, "refine"))
        return out

    def save(self, path) -> Path:
        path = Path(path)
        lines = [
            f"threshold={self.threshold!r}",
            f"threshold_met={int(self.threshold_met)}",
            f"prepend_refine={int(self.prepend_refine)}",
            f"append_refine={int(self.append_refine)}",
            "ratios=" + " ".join(repr(r) for r in self.ratios),
            "difficulties=" + " ".join(repr(d) for d in self.difficulties),
        ]
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text("\n".join(lines) + "\n")
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path) -> "Schedule":
        fields_seen = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise StructuralError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            fields_seen[key] = value
        try:
            return cls(
                ratios=[float(x) for x in fields_seen["ratios"].split()],
                threshold=float(fields_seen["threshold"]),
                difficulties=[float(x) for x in fields_seen["difficulties"].split()],
                prepend_refine=bool(int(fields_seen["prepend_refine"])),
                append_refine=bool(int(fields_seen["append_refine"])),
                threshold_met=bool(int(fields_seen["threshold_met"])),
            )
        except KeyError as exc:
            raise StructuralError(f"{path}: missing field {exc}") from exc


def finalize(
    ratios: list[float],
    threshold: float,
    oracle,
    threshold_met: bool = True,
) -> Schedule:
    """Annotate a pruned ratio list with difficulties and both refine stages."""
    difficulties = [oracle(ratios[i - 1], ratios[i]) for i in range(1, len(ratios))]
    return Schedule(
        ratios=list(ratios),
        threshold=threshold,
        difficulties=difficulties,
        prepend_refine=True,
        append_refine=True,
        threshold_met=threshold_met,
    )


def build_schedule(
    oracle,
    threshold: float,
    min_width: float = MIN_WIDTH,
    max_subtasks: int = MAX_SUBTASKS,
) -> Schedule:
    ratios, met = decompose(oracle, threshold, min_width, max_subtasks)
    ratios = prune(ratios, oracle, threshold)
    return finalize(ratios, threshold, oracle, met)


def threshold_for_count(
    oracle,
    target: int,
    lo: float = 1e-4,
    iters: int = 48,
    min_width: float = MIN_WIDTH,
    max_subtasks: int = MAX_SUBTASKS,
) -> float:
    """Bisection-search a threshold whose schedule has ``target`` subtasks.

    Subtask count is a decreasing step function of the threshold, so a
    geometric bisection between a tiny floor and d(0,1) homes in on the
    plateau; the closest count seen wins if the exact target is unreachable.
    """
    if target < 1:
        raise StructuralError("target subtask count must be >= 1")

    def count_at(th: float) -> int:
        try:
            ratios, _ = decompose(oracle, th, min_width, max_subtasks)
        except DecompositionError:
            return max_subtasks + 1
        return len(prune(ratios, oracle, th)) - 1

    hi = max(float(oracle(0.0, 1.0)), lo * 4.0)
    if count_at(hi) >= target:
        return hi
    best_th, best_gap = hi, abs(count_at(hi) - target)
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        c = count_at(mid)
        gap = abs(c - target)
        if gap < best_gap or (gap == best_gap and mid > best_th):
            best_th, best_gap = mid, gap
        if c == target:
            return mid
        if c > target:
            lo = mid
        else:
            hi = mid
    return best_th


def preset_threshold(oracle, preset: str, **kwargs) -> float:
    if preset not in PRESET_TARGETS:
        raise StructuralError(
            f"unknown preset {preset!r}; expected one of {sorted(PRESET_TARGETS)}"
        )
    return threshold_for_count(oracle, PRESET_TARGETS[preset], **kwargs)


@dataclass
class LossWindow:
    """Running-mean convergence detector with a one-way latch.

    The mean is taken over the last ``capacity`` losses. Stall iterations are
    counted only once a full window has set a baseline, so a constant loss
    stream converges exactly at iteration capacity + patience.
    """

    capacity: int = WINDOW_DEFAULT
    values: deque = field(default_factory=deque)
    best_mean: float = math.inf
    stall_count: int = 0
    count: int = 0
    converged: bool = False

    @property
    def running_mean(self) -> float:
        if not self.values:
            return math.nan
        return sum(self.values) / len(self.values)


def update_convergence(
    window: LossWindow,
    loss: float,
    patience: int = PATIENCE_DEFAULT,
    rel_tolerance: float = REL_TOLERANCE_DEFAULT,
) -> bool:
    """Feed one loss; True once the running mean has stalled for ``patience``."""
    loss = float(loss)
    if not math.isfinite(loss) or loss < 0.0:
        raise TrainingAbort(f"invalid training loss {loss!r}")
    if window.converged:
        return True
    window.values.append(loss)
    if len(window.values) > window.capacity:
        window.values.popleft()
    window.count += 1
    mean = window.running_mean
    if not math.isfinite(window.best_mean) or (
        mean < window.best_mean - rel_tolerance * abs(window.best_mean)
    ):
        window.best_mean = mean
        window.stall_count = 0
    elif window.count > window.capacity:
        window.stall_count += 1
    if window.stall_count >= patience:
        window.converged = True
    return window.converged
