"""Structural similarity: reference oracle, gradient, multi-scale distance.

The reference implementation below recomputes SSIM from its definition with
scipy.signal.convolve2d, a different mechanism than the shipped
uniform_filter path, so agreement is meaningful.
"""

import numpy as np
import pytest
from scipy.signal import convolve2d

from proedit.ssim import (
    box_mean,
    downsample2,
    multiscale_distance,
    ssim,
    ssim_and_grad,
)

# Frozen from the reference implementation on the sinusoid pair below.
GOLDEN_SINGLE_SCALE = 0.9654703088689772
GOLDEN_MULTISCALE = 0.13917138759640424


def ref_box_mean(x):
    kernel = np.ones((7, 7)) / 49.0
    return np.stack(
        [convolve2d(x[:, :, c], kernel, mode="same", boundary="fill") for c in range(3)],
        axis=2,
    )


def ref_ssim(x, y):
    c1, c2 = 0.01**2, 0.03**2
    ux, uy = ref_box_mean(x), ref_box_mean(y)
    vx = ref_box_mean(x * x) - ux * ux
    vy = ref_box_mean(y * y) - uy * uy
    cxy = ref_box_mean(x * y) - ux * uy
    smap = ((2 * ux * uy + c1) * (2 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return float(np.mean(smap))


def sinusoid_pair():
    rng = np.random.default_rng(11)
    base = rng.uniform(0.2, 0.8, size=(48, 48, 3))
    warped = np.clip(base + 0.15 * np.sin(np.linspace(0, 6.0, 48))[None, :, None], 0.0, 1.0)
    return base, warped


class TestBoxMean:
    def test_matches_convolution_reference(self):
        img = np.random.default_rng(0).uniform(size=(20, 24, 3))
        np.testing.assert_allclose(box_mean(img), ref_box_mean(img), atol=1e-13)

    def test_constant_interior(self):
        img = np.ones((16, 16, 3))
        out = box_mean(img)
        # Zero padding dims the border but the interior must stay 1.
        np.testing.assert_allclose(out[3:-3, 3:-3], 1.0, atol=1e-13)
        assert out[0, 0, 0] < 1.0


class TestSsim:
    def test_identity_is_one(self):
        img = np.random.default_rng(1).uniform(size=(16, 16, 3))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry(self):
        a, b = sinusoid_pair()
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_against_reference(self):
        a, b = sinusoid_pair()
        assert ssim(a, b) == pytest.approx(ref_ssim(a, b), abs=1e-12)

    def test_golden_value(self):
        a, b = sinusoid_pair()
        assert ssim(a, b) == pytest.approx(GOLDEN_SINGLE_SCALE, abs=1e-12)


class TestSsimGrad:
    def test_value_matches_plain_ssim(self):
        a, b = sinusoid_pair()
        value, _ = ssim_and_grad(a, b)
        assert value == pytest.approx(ssim(a, b), abs=1e-14)

    def test_stationary_at_identity(self):
        # x == y maximizes SSIM, so the gradient must vanish to rounding.
        img = np.random.default_rng(2).uniform(size=(16, 16, 3))
        value, grad = ssim_and_grad(img, img)
        assert value == 1.0
        assert np.max(np.abs(grad)) < 1e-12

    def test_finite_difference_directional(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0.1, 0.9, size=(20, 20, 3))
        y = rng.uniform(0.1, 0.9, size=(20, 20, 3))
        _, grad = ssim_and_grad(x, y)
        direction = rng.normal(size=x.shape)
        direction /= np.linalg.norm(direction)
        eps = 1e-6
        up, _ = ssim_and_grad(x + eps * direction, y)
        down, _ = ssim_and_grad(x - eps * direction, y)
        fd = (up - down) / (2 * eps)
        analytic = float(np.sum(grad * direction))
        assert analytic == pytest.approx(fd, rel=1e-4, abs=1e-10)

    def test_gradient_drives_similarity_up(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(0.2, 0.8, size=(16, 16, 3))
        y = rng.uniform(0.2, 0.8, size=(16, 16, 3))
        before, grad = ssim_and_grad(x, y)
        after, _ = ssim_and_grad(x + 1e-3 * grad / np.max(np.abs(grad)), y)
        assert after > before


class TestDownsample:
    def test_halves_dimensions(self):
        img = np.random.default_rng(5).uniform(size=(17, 22, 3))
        out = downsample2(img)
        assert out.shape == (8, 11, 3)

    def test_averages_blocks(self):
        img = np.arange(4 * 4 * 3, dtype=float).reshape(4, 4, 3)
        out = downsample2(img)
        expected = 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])
        np.testing.assert_array_equal(out, expected)


class TestMultiscaleDistance:
    def test_identity_is_zero(self):
        img = np.random.default_rng(6).uniform(size=(32, 32, 3))
        assert multiscale_distance(img, img) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        a, b = sinusoid_pair()
        assert multiscale_distance(a, b) == pytest.approx(multiscale_distance(b, a), abs=1e-12)

    def test_range_clipped(self):
        # Checkerboard versus its inverse saturates at the upper bound.
        tile = np.indices((64, 64)).sum(axis=0) // 8 % 2
        board = np.repeat(tile[:, :, None], 3, axis=2).astype(float)
        assert multiscale_distance(board, 1.0 - board) == 1.0

    def test_golden_value(self):
        a, b = sinusoid_pair()
        assert multiscale_distance(a, b) == pytest.approx(GOLDEN_MULTISCALE, abs=1e-12)

    def test_matches_reference_composition(self):
        a, b = sinusoid_pair()
        weights = (0.2, 0.3, 0.5)
        vals, used = [], []
        xa, xb = a, b
        for i, w in enumerate(weights):
            if min(xa.shape[0], xa.shape[1]) >= 7:
                vals.append(ref_ssim(xa, xb))
                used.append(w)
            if i < 2:
                xa, xb = downsample2(xa), downsample2(xb)
        expected = np.clip(1 - sum(v * w for v, w in zip(vals, used)) / sum(used), 0, 1)
        assert multiscale_distance(a, b) == pytest.approx(expected, abs=1e-12)

    def test_small_image_drops_coarse_scales(self):
        # At 12x12 only the first two scales have room for the 7x7 window.
        rng = np.random.default_rng(7)
        a = rng.uniform(size=(12, 12, 3))
        b = rng.uniform(size=(12, 12, 3))
        s1 = ref_ssim(a, b)
        da, db = downsample2(a), downsample2(b)
        # 6x6 is below the window: only scale 0 counts.
        assert min(da.shape[0], da.shape[1]) < 7
        expected = np.clip(1 - s1, 0, 1)
        assert multiscale_distance(a, b) == pytest.approx(expected, abs=1e-12)

    def test_resolution_mismatch_rejected(self):
        from proedit.errors import StructuralError

        with pytest.raises(StructuralError):
            multiscale_distance(np.zeros((8, 8, 3)), np.zeros((8, 10, 3)))
