"""Image helpers: validation, PSNR, and PNG round-trips.

Images are plain numpy arrays of shape (H, W, 3), float64, values in [0, 1].
"""

from __future__ import annotations

import io
import math

import numpy as np
from PIL import Image as PILImage

from .errors import StructuralError


def require_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise StructuralError(f"expected an (H, W, 3) image, got shape {img.shape}")
    return img


def require_same_resolution(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise StructuralError(f"image resolution mismatch: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for unit-range images."""
    require_same_resolution(require_image(a), require_image(b))
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def to_png_bytes(img: np.ndarray) -> bytes:
    img = require_image(img)
    data = np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def from_png_bytes(data: bytes) -> np.ndarray:
    with PILImage.open(io.BytesIO(data)) as pil:
        arr = np.asarray(pil.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def save_png(img: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_png_bytes(img))


def load_png(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return from_png_bytes(fh.read())
