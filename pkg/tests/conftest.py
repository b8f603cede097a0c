"""Shared fixtures: small deterministic scenes and camera rigs."""

import numpy as np
import pytest

from proedit.camera import orbit_cameras
from proedit.scenes import SCENE_EXTENT, cluster_cloud, texture_pair
from proedit.splat import GaussianCloud


def tiny_cloud(n, seed=0, extent=SCENE_EXTENT):
    """Random cloud small enough for finite-difference work."""
    rng = np.random.default_rng(seed)
    return GaussianCloud(
        means=rng.normal(0.0, 0.5, size=(n, 3)),
        log_scales=rng.uniform(np.log(0.05), np.log(0.3), size=(n, 3)),
        rotations=rng.normal(size=(n, 4)),
        opacity_logits=rng.uniform(-1.0, 2.0, size=(n,)),
        colors=rng.uniform(0.1, 0.9, size=(n, 3)),
        scene_extent=extent,
    )


@pytest.fixture(scope="session")
def standard_pair():
    return texture_pair(160, 7)


@pytest.fixture(scope="session")
def cluster160():
    return cluster_cloud(160, 7)


@pytest.fixture
def cams32():
    return orbit_cameras(4, width=32, height=32)


@pytest.fixture
def cams64():
    return orbit_cameras(8, width=64, height=64)
