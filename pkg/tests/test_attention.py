import itertools
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pointformer.attn import (  # noqa: E402
    NORMALIZERS,
    OPERATORS,
    POS_MODES,
    AttentionConfig,
    PointTransformerLayer,
    PositionEncoding,
    position_encoding,
)
from pointformer.geo import knn_search  # noqa: E402
from pointformer.harness.gradsuite import attention_checks  # noqa: E402
from pointformer.nn import MLP  # noqa: E402
from pointformer.util.errors import InvalidArgument  # noqa: E402

F64 = np.float64
VARIANTS = list(itertools.product(OPERATORS, POS_MODES, NORMALIZERS))


def lin(layer, x):
    return x @ layer.weight.data + layer.bias.data


def mlp(m, x):
    return lin(m.fc2, np.maximum(lin(m.fc1, x), 0))


def naive_layer(layer, x, p, idx):
    """Point-by-point, neighbor-by-neighbor, channel-by-channel re-implementation."""
    cfg = layer.cfg
    n, d = x.shape
    y = np.zeros((n, d))
    if cfg.operator in ("mlp", "mlp_pool"):
        h = np.array([mlp(layer.mlp, x[i]) for i in range(n)])
        if cfg.operator == "mlp":
            return h
        for i in range(n):
            for c in range(d):
                y[i, c] = max(h[j, c] for j in idx[i])
        return y

    def delta(theta, i, j):
        if cfg.absolute:
            return mlp(theta, p[i]) + mlp(theta, p[j])
        return mlp(theta, p[i] - p[j])

    for i in range(n):
        q = lin(layer.phi, x[i])
        if cfg.operator == "scalar":
            logits = []
            for j in idx[i]:
                s = sum(q[c] * lin(layer.psi, x[j])[c] for c in range(d))
                if cfg.scaled:
                    s /= np.sqrt(d)
                if cfg.pe_attention:
                    s += delta(layer.theta_scalar, i, j)[0]
                logits.append(s)
            w = _normalize(np.array(logits), cfg.normalize)
            for jj, j in enumerate(idx[i]):
                y[i] += w[jj] * lin(layer.alpha, x[j])
            continue

        g, vals = [], []
        for j in idx[i]:
            a = q - lin(layer.psi, x[j])
            v = lin(layer.alpha, x[j])
            if cfg.pos_mode != "none":
                dl = delta(layer.theta, i, j)
                if cfg.pe_attention:
                    a = a + dl
                if cfg.pe_feature:
                    v = v + dl
            g.append(mlp(layer.gamma, a))
            vals.append(v)
        g, vals = np.array(g), np.array(vals)
        for c in range(d):
            w = _normalize(g[:, c], cfg.normalize)
            y[i, c] = sum(w[jj] * vals[jj, c] for jj in range(len(w)))
    return y


def _normalize(logits, how):
    if how == "identity":
        return logits
    e = np.exp(logits - logits.max())
    return e / e.sum()


def instance(seed, n=6, k=3, d=4):
    rng = np.random.default_rng(seed)
    p = rng.standard_normal((n, 3))
    x = rng.standard_normal((n, d))
    return rng, x, p, knn_search(p, p, k).indices


class TestAttentionConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = AttentionConfig(d=8)
        fields = (cfg.k, cfg.operator, cfg.pos_mode, cfg.normalize)
        self.assertEqual(fields, (16, "vector", "relative", "softmax"))
        self.assertEqual(cfg.label(), "vector/relative/softmax")

    def test_position_gates(self):
        expected = {
            "none": (False, False),
            "absolute": (True, True),
            "relative": (True, True),
            "relative_attn_only": (True, False),
            "relative_feat_only": (False, True),
        }
        for mode, gates in expected.items():
            with self.subTest(pos_mode=mode):
                cfg = AttentionConfig(d=2, pos_mode=mode)
                self.assertEqual((cfg.pe_attention, cfg.pe_feature), gates)

    def test_invalid_values(self):
        for kwargs in (
            {"d": 0},
            {"d": 2, "k": 0},
            {"d": 2, "operator": "cosine"},
            {"d": 2, "pos_mode": "rotary"},
            {"d": 2, "normalize": "sigmoid"},
        ):
            with self.subTest(**kwargs):
                with self.assertRaises(InvalidArgument):
                    AttentionConfig(**kwargs)


class TestPositionEncoding(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)
        self.theta = MLP(3, 5, 5, self.rng, F64)

    def test_zero_displacement_is_constant(self):
        p = self.rng.standard_normal((4, 3))
        delta = position_encoding(p, p.copy(), self.theta)
        np.testing.assert_allclose(delta, np.tile(mlp(self.theta, np.zeros(3)), (4, 1)))

    def test_translation_invariant(self):
        p_i, p_j = self.rng.standard_normal((2, 6, 3))
        offset = np.array([3.0, -2.0, 0.5])
        np.testing.assert_allclose(
            position_encoding(p_i + offset, p_j + offset, self.theta),
            position_encoding(p_i, p_j, self.theta),
            atol=1e-12,
        )

    def test_shape_mismatch(self):
        with self.assertRaises(InvalidArgument):
            position_encoding(np.zeros((2, 3)), np.zeros((3, 3)), self.theta)
        with self.assertRaises(InvalidArgument):
            position_encoding(np.zeros((2, 1, 2)), np.zeros((2, 4, 2)), self.theta)

    def test_centre_broadcasts_against_neighbors(self):
        p = self.rng.standard_normal((8, 3))
        idx = knn_search(p, p, 4).indices
        delta = position_encoding(p[:, None, :], p[idx], self.theta)
        self.assertEqual(delta.shape, (8, 4, 5))
        for i in range(8):
            for slot, j in enumerate(idx[i]):
                np.testing.assert_allclose(
                    delta[i, slot], mlp(self.theta, p[i] - p[j]), atol=1e-12
                )

    def test_module_gradients(self):
        enc = PositionEncoding(4, 4, self.rng, F64)
        enc.forward(self.rng.standard_normal((3, 2, 3)), self.rng.standard_normal((3, 2, 3)))
        self.assertIsNone(enc.backward(np.ones((3, 2, 4))))
        self.assertEqual(enc.theta.fc1.weight.grad.shape, (3, 4))


class TestLayerAgainstOracle(unittest.TestCase):
    def test_every_variant_matches_loop_oracle(self):
        for seed, (operator, pos_mode, normalize) in enumerate(VARIANTS):
            with self.subTest(operator=operator, pos_mode=pos_mode, normalize=normalize):
                rng, x, p, idx = instance(seed)
                cfg = AttentionConfig(
                    d=4, k=3, operator=operator, pos_mode=pos_mode, normalize=normalize
                )
                layer = PointTransformerLayer(cfg, rng, F64)
                np.testing.assert_allclose(
                    layer.forward(x, p, idx), naive_layer(layer, x, p, idx), rtol=0, atol=1e-10
                )

    def test_vector_n4_k2_d3(self):
        rng, x, p, idx = instance(100, n=4, k=2, d=3)
        layer = PointTransformerLayer(AttentionConfig(d=3, k=2), rng, F64)
        np.testing.assert_allclose(
            layer.forward(x, p, idx), naive_layer(layer, x, p, idx), rtol=0, atol=1e-10
        )

    def test_scaled_scalar_attention(self):
        rng, x, p, idx = instance(101)
        cfg = AttentionConfig(d=4, k=3, operator="scalar", scaled=True)
        layer = PointTransformerLayer(cfg, rng, F64)
        np.testing.assert_allclose(
            layer.forward(x, p, idx), naive_layer(layer, x, p, idx), rtol=0, atol=1e-10
        )


class TestLayerProperties(unittest.TestCase):
    def test_self_only_neighborhood(self):
        rng, x, p, _ = instance(1)
        idx = np.arange(len(x))[:, None]
        layer = PointTransformerLayer(AttentionConfig(d=4, k=1), rng, F64)
        y = layer.forward(x, p, idx)
        np.testing.assert_array_equal(layer.weights, 1.0)
        expected = lin(layer.alpha, x) + mlp(layer.theta, np.zeros(3))
        np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_scalar_single_neighbor_returns_value(self):
        rng, x, p, _ = instance(2)
        idx = np.roll(np.arange(len(x)), 1)[:, None]
        cfg = AttentionConfig(d=4, k=1, operator="scalar")
        layer = PointTransformerLayer(cfg, rng, F64)
        np.testing.assert_allclose(layer.forward(x, p, idx), lin(layer.alpha, x[idx[:, 0]]))

    def test_scalar_identical_neighbors_are_uniform(self):
        rng, _, p, idx = instance(3)
        x = np.tile(rng.standard_normal(4), (len(p), 1))
        cfg = AttentionConfig(d=4, k=3, operator="scalar", pos_mode="none")
        layer = PointTransformerLayer(cfg, rng, F64)
        layer.forward(x, p, idx)
        np.testing.assert_allclose(layer.weights, 1 / 3, atol=1e-15)

    def test_neighbor_order_within_row_is_irrelevant(self):
        for operator, pos_mode, normalize in VARIANTS:
            with self.subTest(operator=operator, pos_mode=pos_mode, normalize=normalize):
                rng, x, p, idx = instance(4, n=8, k=4)
                cfg = AttentionConfig(
                    d=4, k=4, operator=operator, pos_mode=pos_mode, normalize=normalize
                )
                layer = PointTransformerLayer(cfg, rng, F64)
                shuffled = np.array([row[rng.permutation(4)] for row in idx])
                np.testing.assert_array_equal(
                    layer.forward(x, p, idx), layer.forward(x, p, shuffled)
                )

    def test_softmax_weights_sum_to_one(self):
        for operator in ("vector", "scalar"):
            with self.subTest(operator=operator):
                rng, x, p, idx = instance(5, n=10, k=5)
                layer = PointTransformerLayer(AttentionConfig(d=4, k=5, operator=operator), rng)
                layer.forward(x.astype(np.float32), p, idx)
                np.testing.assert_allclose(layer.weights.sum(axis=1), 1.0, atol=1e-6)
                layer64 = PointTransformerLayer(
                    AttentionConfig(d=4, k=5, operator=operator), rng, F64
                )
                layer64.forward(x, p, idx)
                np.testing.assert_allclose(layer64.weights.sum(axis=1), 1.0, atol=1e-9)

    def test_point_permutation_equivariance(self):
        for operator, pos_mode, normalize in VARIANTS:
            with self.subTest(operator=operator, pos_mode=pos_mode, normalize=normalize):
                rng, x, p, idx = instance(6, n=12, k=4)
                cfg = AttentionConfig(
                    d=4, k=4, operator=operator, pos_mode=pos_mode, normalize=normalize
                )
                layer = PointTransformerLayer(cfg, rng, F64)
                y = layer.forward(x, p, idx)
                perm = rng.permutation(12)
                inv = np.argsort(perm)
                y_perm = layer.forward(x[perm], p[perm], inv[idx[perm]])
                np.testing.assert_allclose(y_perm, y[perm], atol=1e-6)

    def test_translation(self):
        offset = np.array([5.0, -3.0, 2.0])
        for operator, pos_mode, normalize in VARIANTS:
            with self.subTest(operator=operator, pos_mode=pos_mode, normalize=normalize):
                rng, x, p, idx = instance(7, n=10, k=4)
                cfg = AttentionConfig(
                    d=4, k=4, operator=operator, pos_mode=pos_mode, normalize=normalize
                )
                layer = PointTransformerLayer(cfg, rng, F64)
                y = layer.forward(x, p, idx)
                moved = layer.forward(x, p + offset, idx)
                uses_absolute = pos_mode == "absolute" and operator in ("vector", "scalar")
                if uses_absolute:
                    self.assertGreater(np.abs(moved - y).max(), 1e-6)
                else:
                    np.testing.assert_allclose(moved, y, atol=1e-6)

    def test_mlp_is_pointwise(self):
        rng, x, p, idx = instance(8)
        layer = PointTransformerLayer(AttentionConfig(d=4, k=3, operator="mlp"), rng, F64)
        y = layer.forward(x, p, idx)
        x2 = x.copy()
        x2[1:] += 1.0
        np.testing.assert_allclose(layer.forward(x2, p, idx)[0], y[0], rtol=0, atol=1e-12)

    def test_mlp_pool_self_only_reduces_to_mlp(self):
        rng, x, p, _ = instance(9)
        cfg = AttentionConfig(d=4, k=1, operator="mlp_pool")
        layer = PointTransformerLayer(cfg, rng, F64)
        idx = np.arange(len(x))[:, None]
        np.testing.assert_allclose(layer.forward(x, p, idx), mlp(layer.mlp, x))

    def test_parameters_only_for_used_branches(self):
        cases = {
            ("vector", "none"): {"phi", "psi", "alpha", "gamma"},
            ("vector", "relative"): {"phi", "psi", "alpha", "gamma", "theta"},
            ("scalar", "relative"): {"phi", "psi", "alpha", "theta_scalar"},
            ("scalar", "relative_feat_only"): {"phi", "psi", "alpha"},
            ("mlp", "relative"): {"mlp"},
            ("mlp_pool", "relative"): {"mlp"},
        }
        for (operator, pos_mode), expected in cases.items():
            with self.subTest(operator=operator, pos_mode=pos_mode):
                cfg = AttentionConfig(d=3, operator=operator, pos_mode=pos_mode)
                layer = PointTransformerLayer(cfg, np.random.default_rng(0), F64)
                heads = {name.split(".")[0] for name, _ in layer.named_parameters()}
                self.assertEqual(heads, expected)

    def test_neighbor_table_shape_checked(self):
        rng, x, p, idx = instance(10)
        layer = PointTransformerLayer(AttentionConfig(d=4, k=3), rng, F64)
        with self.assertRaises(InvalidArgument):
            layer.forward(x, p, idx[:, :2])
        with self.assertRaises(InvalidArgument):
            layer.forward(x[:, :3], p, idx)
        with self.assertRaises(InvalidArgument):
            layer.forward(x, p, idx + len(x))

    def test_k_clamped_to_point_count(self):
        rng, x, p, _ = instance(11, n=3, k=3)
        layer = PointTransformerLayer(AttentionConfig(d=4, k=16), rng, F64)
        self.assertEqual(layer.forward(x, p, knn_search(p, p, 3)).shape, (3, 4))


class TestLayerGradients(unittest.TestCase):
    def test_all_forty_variants_pass(self):
        reports = attention_checks(np.random.default_rng(0), 1e-4)
        self.assertEqual(len(reports), 40)
        self.assertEqual(len({r.variant for r in reports}), 40)
        for report in reports:
            with self.subTest(variant=report.variant):
                self.assertTrue(report.passed, report.worst())


if __name__ == "__main__":
    unittest.main()
