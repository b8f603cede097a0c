"""Instruction embeddings and the ratio interpolation that defines subtasks.

An editing instruction is represented only by its embedding vector; the
partially-applied instruction at ratio ``r`` is the linear interpolation
``r * edit + (1 - r) * null``. Nothing downstream depends on the embedding
layout beyond its dimension.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import EmbeddingParseError, StructuralError

DEFAULT_DIM = 16


def as_ratio(value) -> float:
    """Validate a subtask ratio and return it as a float in [0, 1]."""
    r = float(value)
    if not np.isfinite(r) or r < 0.0 or r > 1.0:
        raise StructuralError(f"ratio must lie in [0, 1], got {value!r}")
    return r


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Embedding:
    """A fixed-dimension real vector; immutable and safe to share."""

    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1 or values.size == 0:
            raise StructuralError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise StructuralError("embedding entries must all be finite")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    @classmethod
    def zeros(cls, dim: int = DEFAULT_DIM) -> "Embedding":
        return cls(np.zeros(dim))


@dataclass(frozen=True)
class PromptPair:
    """The two interpolation endpoints: the full instruction and the empty one."""

    edit: Embedding
    null: Embedding

    def __post_init__(self):
        if self.edit.dim != self.null.dim:
            raise StructuralError(
                f"edit/null dimension mismatch: {self.edit.dim} vs {self.null.dim}"
            )

    @property
    def dim(self) -> int:
        return self.edit.dim


def interpolate(pair: PromptPair, r) -> Embedding:
    """Embedding of the ratio-``r`` subtask: ``r * edit + (1 - r) * null``."""
    r = as_ratio(r)
    values = r * pair.edit.values + (1.0 - r) * pair.null.values
    return Embedding(values)


def synthetic_pair(dim: int = DEFAULT_DIM, seed: int = 0) -> PromptPair:
    """A seeded stand-in pair: random unit edit vector, zero null vector."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xE])))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return PromptPair(edit=Embedding(v), null=Embedding.zeros(dim))


def save_embeddings(pair: PromptPair, path) -> None:
    """Write a pair to ``path``: a ``dim=<D>`` header, then edit and null rows.

    Values are written with ``repr`` so finite floats round-trip bit-exactly.
    """
    lines = [f"dim={pair.dim}"]
    for emb in (pair.edit, pair.null):
        lines.append(" ".join(repr(float(v)) for v in emb.values))
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_embeddings(path) -> PromptPair:
    """Parse a pair written by :func:`save_embeddings`."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, line.strip()) for i, line in enumerate(raw) if line.strip()]
    if not lines:
        raise EmbeddingParseError("empty embedding file", line=1)
    header_no, header = lines[0]
    if not header.startswith("dim="):
        raise EmbeddingParseError(f"expected 'dim=<D>' header, got {header!r}", line=header_no)
    try:
        dim = int(header[len("dim="):])
    except ValueError:
        raise EmbeddingParseError(f"bad dimension {header[4:]!r}", line=header_no) from None
    if dim <= 0:
        raise EmbeddingParseError(f"dimension must be positive, got {dim}", line=header_no)
    if len(lines) != 3:
        raise EmbeddingParseError(
            f"expected exactly 2 embedding rows after the header, got {len(lines) - 1}",
            line=lines[-1][0],
        )
    rows = []
    for line_no, text in lines[1:]:
        parts = text.split()
        if len(parts) != dim:
            raise EmbeddingParseError(
                f"expected {dim} values, got {len(parts)}", line=line_no
            )
        try:
            values = np.array([float(p) for p in parts], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingParseError(str(exc), line=line_no) from None
        if not np.all(np.isfinite(values)):
            raise EmbeddingParseError("non-finite embedding value", line=line_no)
        rows.append(Embedding(values))
    return PromptPair(edit=rows[0], null=rows[1])
