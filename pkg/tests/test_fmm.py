import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splatnav.fmm import descend_path, fmm_distance, snap_to_traversable


def random_map(seed, size=60, n_boxes=10):
    rng = np.random.default_rng(seed)
    trav = np.ones((size, size), bool)
    for _ in range(n_boxes):
        i, j = rng.integers(4, size - 12, 2)
        h, w = rng.integers(2, 10, 2)
        trav[i:i + h, j:j + w] = False
    trav[1, 1] = True
    return trav


class TestDistances:
    def test_source_distance_zero(self):
        field = fmm_distance(np.ones((20, 20), bool), (3, 4), 0.1)
        assert field.dist[3, 4] == 0.0

    def test_empty_grid_corner_within_2pct(self):
        field = fmm_distance(np.ones((50, 50), bool), (0, 0), 1.0)
        exact = np.hypot(49, 49)
        assert abs(field.dist[49, 49] - exact) / exact < 0.02

    @pytest.mark.parametrize("src", [(0, 49), (49, 0), (49, 49)])
    def test_other_corners_within_2pct(self, src):
        field = fmm_distance(np.ones((50, 50), bool), src, 0.05)
        ti, tj = 49 - src[0], 49 - src[1]
        exact = 0.05 * np.hypot(49, 49)
        assert abs(field.dist[ti, tj] - exact) / exact < 0.02

    def test_cell_behind_wall_unreachable(self):
        trav = np.ones((30, 30), bool)
        trav[:, 15] = False
        field = fmm_distance(trav, (5, 5), 1.0)
        assert np.isinf(field.dist[5, 25])
        assert np.isinf(field.dist[5, 15])

    def test_non_traversable_source_raises(self):
        trav = np.ones((10, 10), bool)
        trav[2, 2] = False
        with pytest.raises(ValueError):
            fmm_distance(trav, (2, 2), 1.0)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_neighbor_consistency_random_maps(self, seed):
        """4-adjacent reachable cells differ by at most res*sqrt(2)."""
        trav = random_map(seed)
        field = fmm_distance(trav, (1, 1), 0.05)
        d = field.dist
        fin = np.isfinite(d)
        bound = 0.05 * np.sqrt(2) + 1e-6
        dx = np.abs(d[:, 1:] - d[:, :-1])
        ok_x = ~(fin[:, 1:] & fin[:, :-1]) | (dx <= bound)
        dy = np.abs(d[1:, :] - d[:-1, :])
        ok_y = ~(fin[1:, :] & fin[:-1, :]) | (dy <= bound)
        assert ok_x.all() and ok_y.all()

    def test_obstacle_detour_longer_than_euclidean(self):
        trav = np.ones((40, 40), bool)
        trav[10:30, 20] = False
        field = fmm_distance(trav, (20, 5), 1.0)
        assert field.dist[20, 35] > 30.0  # must detour around the wall


class TestDescend:
    def test_path_reaches_source_and_avoids_obstacles(self):
        for seed in range(5):
            trav = random_map(seed)
            field = fmm_distance(trav, (1, 1), 0.05)
            starts = np.argwhere(np.isfinite(field.dist))
            pick = starts[np.random.default_rng(seed).integers(len(starts))]
            path = descend_path(field, tuple(pick))
            assert path[-1] == (1, 1)
            for cell in path:
                assert trav[cell]

    def test_descent_is_monotone(self):
        trav = random_map(3)
        field = fmm_distance(trav, (1, 1), 0.05)
        starts = np.argwhere(np.isfinite(field.dist))
        path = descend_path(field, tuple(starts[-1]))
        vals = [field.dist[c] for c in path]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestSnap:
    def test_already_traversable(self):
        trav = np.ones((10, 10), bool)
        assert snap_to_traversable(trav, (4, 4), 3) == (4, 4)

    def test_snaps_to_nearest(self):
        trav = np.zeros((10, 10), bool)
        trav[7, 4] = True
        assert snap_to_traversable(trav, (5, 4), 5) == (7, 4)

    def test_none_when_out_of_range(self):
        trav = np.zeros((10, 10), bool)
        trav[9, 9] = True
        assert snap_to_traversable(trav, (0, 0), 3) is None
