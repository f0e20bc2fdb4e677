import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pointformer.geo import (  # noqa: E402
    PointSet,
    fps_sample,
    interpolate,
    interpolation_weights,
    knn_brute_force,
    knn_search,
)
from pointformer.util.errors import InvalidArgument, InvalidInput  # noqa: E402


def naive_knn(points, queries, k, include_self=True):
    """
    Sort every row by (squared distance, index) with Python tuples; when the queries are
    the points, a query ranks ahead of its zero-distance duplicates.
    """
    self_query = queries is points
    idx_rows, d_rows = [], []
    for qi, q in enumerate(queries):
        keyed = []
        for j, p in enumerate(points):
            if not include_self and j == qi:
                continue
            diff = q - p
            d = diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]
            keyed.append((d, not (self_query and j == qi), j))
        keyed.sort()
        idx_rows.append([j for _, _, j in keyed[:k]])
        d_rows.append([d for d, _, _ in keyed[:k]])
    return np.array(idx_rows), np.array(d_rows)


def naive_fps(points, m, start):
    selected = [start]
    while len(selected) < m:
        best, best_d = -1, -1.0
        for i in range(len(points)):
            if i in selected:
                continue
            d = min(float(np.sum((points[i] - points[s]) ** 2)) for s in selected)
            if d > best_d:
                best, best_d = i, d
        selected.append(best)
    return selected


class TestKnnSearch(unittest.TestCase):
    def test_matches_brute_force_over_seeds(self):
        """Heap selection and a full stable sort agree exactly (indices and distances)."""
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(64, 2001))
            pts = rng.standard_normal((n, 3))
            queries = pts[rng.choice(n, size=min(n, 200), replace=False)]
            for k in (1, 4, 8, 16, 32, 64):
                with self.subTest(seed=seed, n=n, k=k):
                    got = knn_search(pts, queries, k, candidate_chunk=97)
                    ref = knn_brute_force(pts, queries, k)
                    np.testing.assert_array_equal(got.indices, ref.indices)
                    np.testing.assert_array_equal(got.sq_dists, ref.sq_dists)

    def test_ties_break_by_smaller_index(self):
        # integer lattice: many equal distances
        rng = np.random.default_rng(3)
        pts = rng.integers(-2, 3, size=(300, 3)).astype(np.float64)
        for k in (1, 5, 27, 64):
            with self.subTest(k=k):
                got = knn_search(pts, pts, k, candidate_chunk=13, query_block=50)
                idx, d = naive_knn(pts, pts, k)
                np.testing.assert_array_equal(got.indices, idx)
                np.testing.assert_array_equal(got.sq_dists, d)

    def test_exclude_self(self):
        rng = np.random.default_rng(4)
        pts = rng.standard_normal((120, 3))
        got = knn_search(pts, pts, 8, include_self=False, candidate_chunk=16)
        idx, d = naive_knn(pts, pts, 8, include_self=False)
        np.testing.assert_array_equal(got.indices, idx)
        np.testing.assert_allclose(got.sq_dists, d, rtol=0, atol=1e-12)
        self.assertFalse(np.any(got.indices == np.arange(120)[:, None]))

    def test_self_is_first_neighbor(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(size=(500, 3))
        table = knn_search(pts, pts, 16)
        np.testing.assert_array_equal(table.indices[:, 0], np.arange(500))
        self.assertTrue(np.all(table.sq_dists[:, 0] == 0))
        self.assertTrue(np.all(np.diff(table.sq_dists, axis=1) >= 0))

    def test_duplicate_points_keep_self_first(self):
        a, b = [0.5, 0.5, 0.5], [2.0, 0.0, 0.0]
        pts = np.array([a, a, b, a])
        for search in (knn_search, knn_brute_force):
            with self.subTest(search=search.__name__):
                table = search(pts, pts, 2)
                np.testing.assert_array_equal(table.indices, [[0, 1], [1, 0], [2, 0], [3, 0]])
                np.testing.assert_array_equal(table.sq_dists[:, 0], 0)
                np.testing.assert_array_equal(search(pts, pts, 1).indices[:, 0], np.arange(4))
        table = knn_search(pts, pts, 3)
        np.testing.assert_array_equal(table.indices[3], [3, 0, 1])

    def test_translation_leaves_neighbors_unchanged(self):
        # dyadic coordinates, so adding the offset is exact
        rng = np.random.default_rng(6)
        pts = rng.integers(-256, 256, size=(300, 3)) / 64.0
        offset = np.array([8.0, -16.0, 4.0])
        for k in (1, 8, 16):
            with self.subTest(k=k):
                moved = knn_search(pts + offset, pts + offset, k, candidate_chunk=64)
                table = knn_search(pts, pts, k, candidate_chunk=64)
                np.testing.assert_array_equal(moved.indices, table.indices)
                np.testing.assert_array_equal(moved.sq_dists, table.sq_dists)

    def test_k_equal_to_n_returns_everything_sorted(self):
        pts = np.array([[0.0, 0, 0], [3, 0, 0], [1, 0, 0], [2, 0, 0]])
        table = knn_search(pts, pts[:1], 4)
        np.testing.assert_array_equal(table.indices, [[0, 2, 3, 1]])
        np.testing.assert_array_equal(table.sq_dists, [[0, 1, 4, 9]])

    def test_accepts_point_sets(self):
        cloud = PointSet(np.eye(3))
        self.assertEqual(knn_search(cloud, cloud, 2).k, 2)

    def test_invalid_arguments(self):
        pts = np.zeros((5, 3))
        for k in (0, 6):
            with self.subTest(k=k):
                with self.assertRaises(InvalidArgument):
                    knn_search(pts, pts, k)
        with self.assertRaises(InvalidArgument):
            knn_search(pts, pts, 5, include_self=False)
        with self.assertRaises(InvalidInput):
            knn_search(np.array([[0.0, np.nan, 0]]), pts, 1)
        with self.assertRaises(InvalidInput):
            knn_search(np.zeros((4, 2)), pts, 1)


class TestFarthestPointSampling(unittest.TestCase):
    def test_matches_greedy_oracle(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 501))
            m = int(rng.integers(1, min(n, 100) + 1))
            start = int(rng.integers(n))
            pts = rng.standard_normal((n, 3))
            with self.subTest(seed=seed, n=n, m=m):
                got = fps_sample(pts, m, start)
                self.assertEqual(got.selected.tolist(), naive_fps(pts, m, start))

    def test_selected_are_distinct_and_start_first(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(size=(200, 3))
        res = fps_sample(pts, 50, start=17)
        self.assertEqual(res.selected[0], 17)
        self.assertEqual(len(set(res.selected.tolist())), 50)
        self.assertTrue(np.all(res.min_dists[res.selected] == 0))

    def test_min_dists_are_distances_to_selected_set(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(size=(80, 3))
        res = fps_sample(pts, 10)
        diff = pts[:, None, :] - pts[res.selected][None]
        expected = (diff**2).sum(-1).min(axis=1)
        np.testing.assert_allclose(res.min_dists, expected, atol=1e-12)

    def test_duplicate_points_pick_smaller_index(self):
        pts = np.zeros((4, 3))
        self.assertEqual(fps_sample(pts, 4).selected.tolist(), [0, 1, 2, 3])

    def test_collinear_points(self):
        pts = np.array([[x, 0.0, 0.0] for x in (0, 1, 2, 3, 10)])
        self.assertEqual(fps_sample(pts, 2, start=0).selected.tolist(), [0, 4])

    def test_sampling_everything_is_a_permutation(self):
        pts = np.random.default_rng(7).standard_normal((37, 3))
        selected = fps_sample(pts, 37, start=5).selected.tolist()
        self.assertEqual(selected[0], 5)
        self.assertEqual(sorted(selected), list(range(37)))

    def test_translation_leaves_selection_unchanged(self):
        rng = np.random.default_rng(8)
        pts = rng.integers(-256, 256, size=(200, 3)) / 64.0
        offset = np.array([8.0, 8.0, -32.0])
        for start in (0, 11):
            with self.subTest(start=start):
                moved = fps_sample(pts + offset, 40, start)
                res = fps_sample(pts, 40, start)
                np.testing.assert_array_equal(moved.selected, res.selected)
                np.testing.assert_array_equal(moved.min_dists, res.min_dists)

    def test_corners_of_a_cube_are_sampled_first(self):
        corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)
        inner = np.random.default_rng(0).uniform(0.3, 0.7, size=(40, 3))
        res = fps_sample(np.vstack([corners, inner]), 8)
        self.assertEqual(sorted(res.selected.tolist()), list(range(8)))

    def test_invalid_arguments(self):
        pts = np.zeros((3, 3))
        for m, start in ((0, 0), (4, 0), (2, 3), (2, -1)):
            with self.subTest(m=m, start=start):
                with self.assertRaises(InvalidArgument):
                    fps_sample(pts, m, start)


class TestInterpolation(unittest.TestCase):
    def test_weights_are_normalized_inverse_distances(self):
        rng = np.random.default_rng(0)
        src = rng.uniform(size=(20, 3))
        tgt = rng.uniform(size=(30, 3))
        idx, w = interpolation_weights(src, tgt)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
        d = ((tgt[:, None, :] - src[idx]) ** 2).sum(-1)
        raw = 1.0 / (d + 1e-8)
        np.testing.assert_allclose(w, raw / raw.sum(axis=1, keepdims=True), rtol=1e-10)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        src = PointSet(rng.uniform(size=(12, 3)), features=rng.standard_normal((12, 4)))
        tgt = rng.uniform(size=(9, 3))
        got = interpolate(src, tgt)
        for t in range(len(tgt)):
            d = ((src.positions - tgt[t]) ** 2).sum(axis=1)
            near = sorted(range(12), key=lambda j: (d[j], j))[:3]
            w = np.array([1.0 / (d[j] + 1e-8) for j in near])
            w /= w.sum()
            expected = sum(w[i] * src.features[j] for i, j in enumerate(near))
            np.testing.assert_allclose(got[t], expected, rtol=1e-10, atol=1e-12)

    def test_coincident_point_reproduces_its_feature(self):
        rng = np.random.default_rng(2)
        src = PointSet(rng.uniform(size=(10, 3)) * 10, features=rng.standard_normal((10, 2)))
        got = interpolate(src, src.positions[4:5])
        np.testing.assert_allclose(got[0], src.features[4], atol=1e-6)

    def test_constant_features_stay_constant(self):
        rng = np.random.default_rng(3)
        src = PointSet(rng.uniform(size=(10, 3)), features=np.full((10, 3), 2.5))
        np.testing.assert_allclose(interpolate(src, rng.uniform(size=(7, 3))), 2.5)

    def test_equidistant_pair_averages(self):
        f1, f2 = np.array([1.0, -2.0, 4.0]), np.array([3.0, 0.5, -4.0])
        src = PointSet(
            np.array([[-1.0, 0, 0], [1.0, 0, 0], [0, 5.0, 0]]), features=np.stack([f1, f2, f1])
        )
        got = interpolate(src, np.zeros((1, 3)), p=2)
        np.testing.assert_allclose(got[0], (f1 + f2) / 2, rtol=0, atol=1e-12)

    def test_translation_leaves_interpolation_unchanged(self):
        rng = np.random.default_rng(4)
        src_pos = rng.integers(-256, 256, size=(30, 3)) / 64.0
        tgt = rng.integers(-256, 256, size=(12, 3)) / 64.0
        features = rng.standard_normal((30, 4))
        offset = np.array([8.0, -8.0, 16.0])
        idx, w = interpolation_weights(src_pos, tgt)
        moved_idx, moved_w = interpolation_weights(src_pos + offset, tgt + offset)
        np.testing.assert_array_equal(moved_idx, idx)
        np.testing.assert_array_equal(moved_w, w)
        np.testing.assert_allclose(
            interpolate(PointSet(src_pos + offset, features=features), tgt + offset),
            interpolate(PointSet(src_pos, features=features), tgt),
            rtol=0,
            atol=1e-12,
        )

    def test_requires_features_and_valid_p(self):
        with self.assertRaises(InvalidInput):
            interpolate(PointSet(np.zeros((3, 3))), np.zeros((1, 3)))
        with self.assertRaises(InvalidArgument):
            interpolation_weights(np.zeros((2, 3)), np.zeros((1, 3)), p=3)


if __name__ == "__main__":
    unittest.main()
