"""Benchmark scene generators: determinism, pairing, and edit structure."""

import math

import numpy as np
import pytest

from proedit.errors import StructuralError
from proedit.scenes import (
    SCENE_EXTENT,
    TEXTURE_SHIFT,
    cluster_cloud,
    geometry_pair,
    held_out_camera,
    make_scene_pair,
    perturbed_copy,
    texture_pair,
    training_views,
)


def clouds_equal(a, b):
    return (
        np.array_equal(a.means, b.means)
        and np.array_equal(a.log_scales, b.log_scales)
        and np.array_equal(a.rotations, b.rotations)
        and np.array_equal(a.opacity_logits, b.opacity_logits)
        and np.array_equal(a.colors, b.colors)
    )


def test_cluster_deterministic():
    assert clouds_equal(cluster_cloud(50, seed=3), cluster_cloud(50, seed=3))
    assert not clouds_equal(cluster_cloud(50, seed=3), cluster_cloud(50, seed=4))


def test_cluster_shape_and_extent():
    cloud = cluster_cloud(33, seed=1)
    assert cloud.size == 33
    assert cloud.scene_extent == SCENE_EXTENT
    assert np.all(np.isfinite(cloud.means))
    assert np.all((cloud.colors >= 0.0) & (cloud.colors <= 1.0))
    np.testing.assert_allclose(np.linalg.norm(cloud.rotations, axis=1), 1.0)
    ops = cloud.opacities()
    assert np.all((ops > 0.5) & (ops < 0.95))


def test_cluster_rejects_empty():
    with pytest.raises(StructuralError):
        cluster_cloud(0)


def test_texture_pair_same_geometry():
    source, target = texture_pair(40, seed=5)
    assert source.size == target.size == 40
    assert np.array_equal(source.means, target.means)
    assert np.array_equal(source.log_scales, target.log_scales)
    assert np.array_equal(source.rotations, target.rotations)
    assert np.array_equal(source.opacity_logits, target.opacity_logits)
    expected = np.clip(source.colors + TEXTURE_SHIFT, 0.0, 1.0)
    assert np.array_equal(target.colors, expected)
    assert not np.array_equal(source.colors, target.colors)


def test_geometry_pair_moves_the_cluster():
    source, target = geometry_pair(40, seed=5)
    assert source.size == target.size == 40
    # Every Gaussian is displaced, scales shrink by a constant log factor.
    displacement = np.linalg.norm(target.means - source.means, axis=1)
    assert np.all(displacement > 0.01)
    np.testing.assert_allclose(
        target.log_scales - source.log_scales, math.log(0.85), rtol=1e-12
    )
    # Rigid rotation plus squash preserves the centroid structure but not
    # positions; opacities are untouched.
    assert np.array_equal(source.opacity_logits, target.opacity_logits)
    np.testing.assert_allclose(np.linalg.norm(target.rotations, axis=1), 1.0)


def test_make_scene_pair_dispatch():
    s1, t1 = make_scene_pair("texture", n=30, seed=2)
    s2, t2 = texture_pair(30, seed=2)
    assert clouds_equal(s1, s2) and clouds_equal(t1, t2)
    s3, _ = make_scene_pair("geometry", n=30, seed=2)
    assert s3.size == 30
    with pytest.raises(StructuralError):
        make_scene_pair("solid")


def test_perturbed_copy_jitters_everything():
    cloud = cluster_cloud(60, seed=9)
    noisy = perturbed_copy(cloud, seed=11)
    assert noisy.size == cloud.size
    assert clouds_equal(perturbed_copy(cloud, seed=11), noisy)
    assert not clouds_equal(noisy, cloud)
    assert np.all(np.linalg.norm(noisy.means - cloud.means, axis=1) > 0)
    # Invariants restored after the jitter.
    np.testing.assert_allclose(np.linalg.norm(noisy.rotations, axis=1), 1.0)
    assert np.all(noisy.grad_accum == 0.0)
    # The original is untouched.
    assert clouds_equal(cloud, cluster_cloud(60, seed=9))


def test_training_views_layout():
    views = training_views(6, width=48, height=32)
    assert len(views) == 6
    for cam in views:
        assert (cam.width, cam.height) == (48, 32)
        eye = -cam.rotation.T @ cam.translation
        np.testing.assert_allclose(np.linalg.norm(eye), 4.0, rtol=1e-12)


def test_held_out_camera_differs_from_orbit():
    views = training_views(8)
    probe = held_out_camera()
    eye = -probe.rotation.T @ probe.translation
    np.testing.assert_allclose(np.linalg.norm(eye), 4.0, rtol=1e-12)
    for cam in views:
        cam_eye = -cam.rotation.T @ cam.translation
        assert np.linalg.norm(cam_eye - eye) > 0.3
