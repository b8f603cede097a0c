"""Difficulty estimation: metric properties, caching, view selection.

The standard-scene golden value below was produced by a term-by-term brute
force over the 8 views (sum of per-view structural distances, no cache, no
scheduler involvement) and then frozen.
"""

import numpy as np
import pytest

from proedit.camera import orbit_cameras
from proedit.difficulty import (
    RATIO_QUANTUM,
    VIEW_LIMIT,
    DifficultyCache,
    difficulty,
    image_distance,
    make_oracle,
    select_views,
)
from proedit.editor import SyntheticEditor, SyntheticEditorConfig
from proedit.errors import StructuralError
from proedit.scenes import texture_pair

GOLDEN_FULL_SPAN = 0.16723363961578952


@pytest.fixture(scope="module")
def task_output():
    source, target = texture_pair(160, 7)
    cams = tuple(orbit_cameras(8, width=64, height=64))
    editor = SyntheticEditor(
        SyntheticEditorConfig(source=source, target=target, cameras=cams, fos_scale=0.0, seed=42)
    )
    return editor.task_output


class TestImageDistance:
    def test_identity(self):
        img = np.random.default_rng(0).uniform(size=(32, 32, 3))
        assert image_distance(img, img) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.uniform(size=(32, 32, 3)), rng.uniform(size=(32, 32, 3))
        assert image_distance(a, b) == image_distance(b, a)

    def test_unit_range(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            a, b = rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3))
            assert 0.0 <= image_distance(a, b) <= 1.0

    def test_resolution_mismatch_rejected(self):
        with pytest.raises(StructuralError):
            image_distance(np.zeros((16, 16, 3)), np.zeros((16, 18, 3)))


class TestSelectViews:
    def test_all_views_when_few(self):
        assert select_views(5) == [0, 1, 2, 3, 4]
        assert select_views(VIEW_LIMIT) == list(range(VIEW_LIMIT))

    def test_subsample_when_many(self):
        picked = select_views(40)
        assert len(picked) == VIEW_LIMIT
        assert picked == sorted(picked)
        assert len(set(picked)) == VIEW_LIMIT
        assert all(0 <= v < 40 for v in picked)

    def test_subsample_deterministic_per_seed(self):
        assert select_views(40, seed=1) == select_views(40, seed=1)
        assert select_views(40, seed=1) != select_views(40, seed=2)

    def test_empty_rejected(self):
        with pytest.raises(StructuralError):
            select_views(0)


class TestDifficulty:
    def test_same_ratio_is_zero(self, task_output):
        views = [0, 1, 2]
        assert difficulty(0.3, 0.3, views, task_output) == 0.0
        # Ratios closer than the quantum count as the same subtask.
        assert difficulty(0.3, 0.3 + 0.4 * RATIO_QUANTUM, views, task_output) == 0.0

    def test_symmetric(self, task_output):
        views = [0, 1]
        assert difficulty(0.2, 0.8, views, task_output) == pytest.approx(
            difficulty(0.8, 0.2, views, task_output), abs=1e-12
        )

    def test_golden_full_span(self, task_output):
        views = select_views(8)
        assert difficulty(0.0, 1.0, views, task_output) == pytest.approx(
            GOLDEN_FULL_SPAN, abs=1e-9
        )

    def test_equals_per_view_sum(self, task_output):
        views = [0, 3, 5]
        expected = sum(
            image_distance(task_output(v, 0.25), task_output(v, 0.75)) for v in views
        )
        got = difficulty(0.25, 0.75, views, task_output)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_cache_transparent(self, task_output):
        views = [0, 1, 2]
        bare = difficulty(0.1, 0.9, views, task_output)
        cache = DifficultyCache()
        cached_first = difficulty(0.1, 0.9, views, task_output, cache=cache)
        cached_second = difficulty(0.1, 0.9, views, task_output, cache=cache)
        assert bare == cached_first == cached_second

    def test_cache_counts_edits_once(self, task_output):
        calls = []

        def counting(v, r):
            calls.append((v, r))
            return task_output(v, r)

        cache = DifficultyCache()
        views = [0, 1]
        difficulty(0.0, 0.5, views, counting, cache=cache)
        difficulty(0.5, 1.0, views, counting, cache=cache)
        difficulty(0.0, 1.0, views, counting, cache=cache)
        # Three ratios, two views: six edits despite three queries.
        assert len(calls) == 6

    def test_symmetric_hits_cache(self, task_output):
        calls = []

        def counting(v, r):
            calls.append((v, r))
            return task_output(v, r)

        cache = DifficultyCache()
        difficulty(0.0, 1.0, [0], counting, cache=cache)
        n_after_first = len(calls)
        difficulty(1.0, 0.0, [0], counting, cache=cache)
        assert len(calls) == n_after_first

    def test_empty_views_rejected(self, task_output):
        with pytest.raises(StructuralError):
            difficulty(0.0, 1.0, [], task_output)

    def test_bad_ratio_rejected(self, task_output):
        with pytest.raises(StructuralError):
            difficulty(-0.1, 1.0, [0], task_output)


class TestCacheTable:
    def test_dump_and_load_round_trip(self, tmp_path, task_output):
        cache = DifficultyCache()
        views = [0, 1]
        for a, b in [(0.0, 1.0), (0.0, 0.5), (0.5, 1.0)]:
            difficulty(a, b, views, task_output, cache=cache)
        path = cache.dump(tmp_path / "cache.txt")
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        for line in lines:
            assert len(line.split()) == 3

        back = DifficultyCache.load(path)
        assert len(back) == 3
        for ra, rb, d in cache.items():
            assert back.get(ra, rb) == d

    def test_loaded_values_short_circuit_edits(self, tmp_path, task_output):
        cache = DifficultyCache()
        difficulty(0.0, 1.0, [0], task_output, cache=cache)
        path = cache.dump(tmp_path / "cache.txt")
        fresh = DifficultyCache.load(path)

        def exploding(v, r):
            raise AssertionError("edit should not be needed on a warm cache")

        value = difficulty(0.0, 1.0, [0], exploding, cache=fresh)
        assert value == cache.get(0.0, 1.0)

    def test_malformed_table_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0.0 1.0\n")
        with pytest.raises(StructuralError):
            DifficultyCache.load(path)

    def test_oracle_binds_cache(self, task_output):
        oracle = make_oracle([0, 1], task_output)
        v1 = oracle(0.0, 1.0)
        assert oracle.cache.get(0.0, 1.0) == v1
        assert len(oracle.cache) == 1
