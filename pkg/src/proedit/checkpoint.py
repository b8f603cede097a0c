"""Scene checkpoints: binary PLY plus a small text sidecar.

The PLY stores one vertex per Gaussian with double-precision properties
x,y,z, scale_0..2 (log), rot_0..3, opacity (logit), red,green,blue.
Everything a file cannot carry in the vertex table (scene extent, iteration
counters) lives in a ``.meta`` sidecar next to it. Round-trips are
bit-exact; writes are temp-file + rename so a crash never leaves a torn
checkpoint.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import IntegrityError
from .splat import GaussianCloud

PLY_PROPERTIES = (
    "x",
    "y",
    "z",
    "scale_0",
    "scale_1",
    "scale_2",
    "rot_0",
    "rot_1",
    "rot_2",
    "rot_3",
    "opacity",
    "red",
    "green",
    "blue",
)

_MAGIC = "ply"
_FORMAT = "format binary_little_endian 1.0"


def sidecar_path(ply_path) -> Path:
    return Path(ply_path).with_suffix(".meta")


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_cloud(cloud: GaussianCloud, path, counters: dict | None = None) -> Path:
    """Write ``path`` (.ply) and its ``.meta`` sidecar; returns the PLY path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = cloud.size
    table = np.empty((n, len(PLY_PROPERTIES)), dtype="<f8")
    table[:, 0:3] = cloud.means
    table[:, 3:6] = cloud.log_scales
    table[:, 6:10] = cloud.rotations
    table[:, 10] = cloud.opacity_logits
    table[:, 11:14] = cloud.colors

    header_lines = [_MAGIC, _FORMAT, f"element vertex {n}"]
    header_lines += [f"property double {name}" for name in PLY_PROPERTIES]
    header_lines.append("end_header")
    header = ("\n".join(header_lines) + "\n").encode("ascii")
    _atomic_write_bytes(path, header + table.tobytes())

    lines = [f"scene_extent={cloud.scene_extent!r}"]
    for key in sorted(counters or {}):
        lines.append(f"{key}={int((counters or {})[key])}")
    _atomic_write_bytes(sidecar_path(path), ("\n".join(lines) + "\n").encode("ascii"))
    return path


def _parse_header(raw: bytes, path: Path):
    end = raw.find(b"end_header\n")
    if end < 0:
        raise IntegrityError(f"{path}: no end_header in PLY")
    body_start = end + len(b"end_header\n")
    lines = raw[:end].decode("ascii", errors="replace").splitlines()
    if not lines or lines[0] != _MAGIC:
        raise IntegrityError(f"{path}: not a PLY file")
    if len(lines) < 2 or lines[1] != _FORMAT:
        raise IntegrityError(f"{path}: expected little-endian binary PLY")
    count = None
    props = []
    for line in lines[2:]:
        if line.startswith("comment"):
            continue
        if line.startswith("element vertex "):
            count = int(line.split()[-1])
        elif line.startswith("property "):
            parts = line.split()
            if len(parts) != 3 or parts[1] != "double":
                raise IntegrityError(f"{path}: unsupported property line {line!r}")
            props.append(parts[2])
        else:
            raise IntegrityError(f"{path}: unexpected header line {line!r}")
    if count is None:
        raise IntegrityError(f"{path}: missing vertex element")
    if tuple(props) != PLY_PROPERTIES:
        raise IntegrityError(f"{path}: unexpected vertex properties {props}")
    return count, body_start


def load_cloud(path) -> tuple[GaussianCloud, dict]:
    """Read a checkpoint written by :func:`save_cloud`."""
    path = Path(path)
    raw = path.read_bytes()
    count, body_start = _parse_header(raw, path)
    expected = count * len(PLY_PROPERTIES) * 8
    body = raw[body_start:]
    if len(body) != expected:
        raise IntegrityError(
            f"{path}: vertex data is {len(body)} bytes, expected {expected}"
        )
    table = np.frombuffer(body, dtype="<f8").reshape(count, len(PLY_PROPERTIES))

    meta = sidecar_path(path)
    if not meta.exists():
        raise IntegrityError(f"{meta}: sidecar missing")
    counters: dict[str, int] = {}
    scene_extent = None
    for lineno, line in enumerate(meta.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise IntegrityError(f"{meta}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        if key == "scene_extent":
            scene_extent = float(value)
        else:
            counters[key] = int(value)
    if scene_extent is None or not np.isfinite(scene_extent) or scene_extent <= 0:
        raise IntegrityError(f"{meta}: missing or invalid scene_extent")

    cloud = GaussianCloud(
        means=table[:, 0:3].copy(),
        log_scales=table[:, 3:6].copy(),
        rotations=table[:, 6:10].copy(),
        opacity_logits=table[:, 10].copy(),
        colors=table[:, 11:14].copy(),
        scene_extent=scene_extent,
    )
    return cloud, counters
