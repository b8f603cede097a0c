"""Structural similarity on unit-range RGB images, with an analytic gradient.

Local statistics use a uniform square window applied with zero padding, so
the box filter is its own adjoint and the gradient of the mean SSIM with
respect to the first image has a closed form. The multi-scale variant
averages SSIM over progressively 2x2-mean-pooled copies.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import StructuralError
from .image import require_image, require_same_resolution

WINDOW = 7
K1 = 0.01
K2 = 0.03
C1 = K1 * K1
C2 = K2 * K2

# Coarse scales carry more weight: blur and structure errors matter more than
# pixel noise for the scheduling and loss decisions built on this metric.
MS_WEIGHTS = (0.2, 0.3, 0.5)


def box_mean(x: np.ndarray, window: int = WINDOW) -> np.ndarray:
    """Zero-padded local mean over a window x window neighborhood per channel."""
    size = (window, window) + (1,) * (x.ndim - 2)
    return uniform_filter(x, size=size, mode="constant", cval=0.0)


def _ssim_terms(x: np.ndarray, y: np.ndarray, window: int):
    u1 = box_mean(x, window)          # E[x]
    u2 = box_mean(x * x, window)      # E[x^2]
    u3 = box_mean(x * y, window)      # E[xy]
    uy = box_mean(y, window)
    uy2 = box_mean(y * y, window)
    var_x = u2 - u1 * u1
    var_y = uy2 - uy * uy
    cov = u3 - u1 * uy
    a1 = 2.0 * u1 * uy + C1
    a2 = 2.0 * cov + C2
    b1 = u1 * u1 + uy * uy + C1
    b2 = var_x + var_y + C2
    return u1, uy, a1, a2, b1, b2


def ssim_map(x: np.ndarray, y: np.ndarray, window: int = WINDOW) -> np.ndarray:
    """Per-pixel, per-channel SSIM map."""
    require_same_resolution(require_image(x), require_image(y))
    _, _, a1, a2, b1, b2 = _ssim_terms(
        np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64), window
    )
    return (a1 * a2) / (b1 * b2)


def ssim(x: np.ndarray, y: np.ndarray, window: int = WINDOW) -> float:
    return float(np.mean(ssim_map(x, y, window)))


def ssim_and_grad(x: np.ndarray, y: np.ndarray, window: int = WINDOW):
    """Mean SSIM and its gradient with respect to ``x``.

    Backpropagates through the three filtered moments that depend on x
    (E[x], E[x^2], E[xy]); the box filter is self-adjoint under zero padding.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    require_same_resolution(require_image(x), require_image(y))
    u1, uy, a1, a2, b1, b2 = _ssim_terms(x, y, window)
    denom = b1 * b2
    s = (a1 * a2) / denom
    n = s.size
    # dS/du1, dS/du2, dS/du3 at each pixel, scaled by the mean reduction.
    g_u1 = (2.0 * uy * (a2 - a1) - 2.0 * u1 * s * (b2 - b1)) / denom / n
    g_u2 = -s / b2 / n
    g_u3 = 2.0 * a1 / denom / n
    grad = box_mean(g_u1, window) + box_mean(g_u2, window) * 2.0 * x + box_mean(g_u3, window) * y
    return float(np.mean(s)), grad


def downsample2(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; trailing odd rows/columns are dropped."""
    h, w = x.shape[0] // 2, x.shape[1] // 2
    x = x[: 2 * h, : 2 * w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def multiscale_distance(
    a: np.ndarray,
    b: np.ndarray,
    weights=MS_WEIGHTS,
    window: int = WINDOW,
) -> float:
    """1 minus weighted multi-scale SSIM, clipped to [0, 1].

    Scales whose pooled copies fall below the window size are dropped and the
    remaining weights renormalized.
    """
    require_same_resolution(require_image(a), require_image(b))
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    values = []
    used = []
    for level, weight in enumerate(weights):
        if min(a.shape[0], a.shape[1]) >= window:
            values.append(ssim(a, b, window))
            used.append(weight)
        if level + 1 < len(weights):
            a = downsample2(a)
            b = downsample2(b)
    if not values:
        raise StructuralError("image too small for the structural metric")
    total = sum(used)
    score = sum(v * w for v, w in zip(values, used)) / total
    return float(np.clip(1.0 - score, 0.0, 1.0))
