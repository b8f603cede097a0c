"""Pinhole cameras and orbit rigs used for rendering and editing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError

ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class Camera:
    """World-to-camera rigid transform plus pinhole intrinsics.

    Convention: camera looks down +z, +x right, +y down (image rows grow
    downward). ``rotation`` rows are the camera axes in world coordinates and
    ``x_cam = rotation @ x_world + translation``.
    """

    rotation: np.ndarray
    translation: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=np.float64)
        trans = np.array(self.translation, dtype=np.float64)
        if rot.shape != (3, 3) or trans.shape != (3,):
            raise StructuralError("camera pose must be a 3x3 rotation and length-3 translation")
        if np.max(np.abs(rot @ rot.T - np.eye(3))) > 1e-6:
            raise StructuralError("camera rotation is not orthonormal")
        if self.width < 8 or self.height < 8:
            raise StructuralError("camera resolution must be at least 8x8")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.width, self.height)

    def world_to_cam(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    @classmethod
    def look_at(
        cls,
        eye,
        target,
        up=(0.0, 1.0, 0.0),
        fov_deg: float = 50.0,
        width: int = 64,
        height: int = 64,
    ) -> "Camera":
        """Camera at ``eye`` looking toward ``target`` with a vertical FOV."""
        if not 0.0 < fov_deg < 180.0:
            raise StructuralError(f"field of view must lie in (0, 180) degrees, got {fov_deg}")
        eye = np.asarray(eye, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        forward = target - eye
        norm = np.linalg.norm(forward)
        if norm < 1e-12:
            raise StructuralError("camera eye coincides with its target")
        forward = forward / norm
        up = np.asarray(up, dtype=np.float64)
        right = np.cross(forward, up)
        if np.linalg.norm(right) < 1e-9:
            # Degenerate up vector; pick any perpendicular axis.
            up = np.array([0.0, 0.0, 1.0]) if abs(forward[1]) > 0.9 else np.array([0.0, 1.0, 0.0])
            right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rotation = np.stack([right, down, forward])
        translation = -rotation @ eye
        focal = 0.5 * height / math.tan(math.radians(fov_deg) / 2.0)
        return cls(
            rotation=rotation,
            translation=translation,
            fx=focal,
            fy=focal,
            cx=width / 2.0,
            cy=height / 2.0,
            width=width,
            height=height,
        )


def orbit_cameras(
    n_views: int,
    radius: float = 4.0,
    elevation_deg: float = 20.0,
    width: int = 64,
    height: int = 64,
    fov_deg: float = 50.0,
    target=(0.0, 0.0, 0.0),
) -> list[Camera]:
    """Evenly spaced cameras on an orbit around ``target``."""
    if n_views < 2:
        raise StructuralError("an orbit needs at least 2 views")
    target = np.asarray(target, dtype=np.float64)
    elev = math.radians(elevation_deg)
    cams = []
    for k in range(n_views):
        azim = 2.0 * math.pi * k / n_views
        eye = target + radius * np.array(
            [math.cos(azim) * math.cos(elev), math.sin(elev), math.sin(azim) * math.cos(elev)]
        )
        cams.append(Camera.look_at(eye, target, fov_deg=fov_deg, width=width, height=height))
    return cams
