"""
The point transformer layer and its ablation variants.

Vector attention (default):

    y_i = sum_j rho(gamma(phi(x_i) - psi(x_j) + delta_ij)) * (alpha(x_j) + delta_ij)

with delta_ij = theta(p_i - p_j) and rho a per-channel softmax over the k neighbors of i.
Scalar attention replaces gamma(...) by the dot product phi(x_i).psi(x_j) (plus a scalar
position term) shared by all channels. The mlp and mlp_pool baselines have no attention.

Neighbor rows are sorted before use, so the output does not depend on the order of the
entries within a row.
"""

from typing import Optional, Union

import numpy as np

from pointformer.attn.config import AttentionConfig
from pointformer.geo.points import NeighborTable
from pointformer.nn import functional as F
from pointformer.nn.layers import MLP, Linear, MaxPoolNeighbors, Module, SoftmaxNeighbors
from pointformer.util.errors import InvalidArgument

NeighborsLike = Union[NeighborTable, np.ndarray]


def position_encoding(p_i: np.ndarray, p_j: np.ndarray, theta: MLP) -> np.ndarray:
    """delta = theta(p_i - p_j) for broadcast-compatible (..., 3) coordinate arrays."""
    if p_i.shape[-1:] != (3,) or p_j.shape[-1:] != (3,):
        raise InvalidArgument(f"coordinates must be (..., 3): {p_i.shape} vs {p_j.shape}")
    try:
        np.broadcast_shapes(p_i.shape, p_j.shape)
    except ValueError:
        raise InvalidArgument(f"coordinate shapes disagree: {p_i.shape} vs {p_j.shape}") from None
    return theta.forward(p_i - p_j)


class PositionEncoding(Module):
    """Trainable relative position encoding theta: 3 -> d_hidden -> d_out."""

    def __init__(self, d_hidden: int, d_out: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.theta = self.add_child("theta", MLP(3, d_hidden, d_out, rng, dtype))

    def forward(self, p_i: np.ndarray, p_j: np.ndarray) -> np.ndarray:
        return position_encoding(p_i, p_j, self.theta)

    def backward(self, ddelta: np.ndarray) -> None:
        self.theta.backward(ddelta)


class PointTransformerLayer(Module):
    """
    forward(x (n, d), p (n, 3), neighbors (n, k)) -> (n, d), with k = min(cfg.k, n).

    Parameters are created only for the branches the configured variant uses.
    """

    def __init__(self, cfg: AttentionConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.cfg = cfg
        d = cfg.d
        self.theta: Optional[MLP] = None
        self.theta_scalar: Optional[MLP] = None
        if cfg.operator in ("mlp", "mlp_pool"):
            self.mlp = self.add_child("mlp", MLP(d, d, d, rng, dtype))
            if cfg.operator == "mlp_pool":
                self.pool = self.add_child("pool", MaxPoolNeighbors())
            return

        self.phi = self.add_child("phi", Linear(d, d, rng, dtype))
        self.psi = self.add_child("psi", Linear(d, d, rng, dtype))
        self.alpha = self.add_child("alpha", Linear(d, d, rng, dtype))
        if cfg.operator == "vector":
            self.gamma = self.add_child("gamma", MLP(d, d, d, rng, dtype))
            if cfg.pos_mode != "none":
                self.theta = self.add_child("theta", MLP(3, d, d, rng, dtype))
        elif cfg.pe_attention:
            self.theta_scalar = self.add_child("theta_scalar", MLP(3, d, 1, rng, dtype))
        if cfg.normalize == "softmax":
            self.rho = self.add_child("rho", SoftmaxNeighbors())
        self.weights: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray, p: np.ndarray, neighbors: NeighborsLike) -> np.ndarray:
        idx = self._check(x, p, neighbors)
        op = self.cfg.operator
        if op == "vector":
            return self.vector_attention(x, p, idx)
        if op == "scalar":
            return self.scalar_attention(x, p, idx)
        if op == "mlp":
            return self.baseline_mlp(x)
        return self.baseline_mlp_pool(x, idx)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        op = self.cfg.operator
        if op == "vector":
            return self._vector_backward(dy)
        if op == "scalar":
            return self._scalar_backward(dy)
        if op == "mlp":
            return self.mlp.backward(dy)
        return self._pool_backward(dy)

    def _check(self, x: np.ndarray, p: np.ndarray, neighbors: NeighborsLike) -> np.ndarray:
        idx = neighbors.indices if isinstance(neighbors, NeighborTable) else np.asarray(neighbors)
        n = x.shape[0] if x.ndim == 2 else -1
        if x.ndim != 2 or x.shape[1] != self.cfg.d:
            raise InvalidArgument(f"expected (n, {self.cfg.d}) features, got {x.shape}")
        if p.shape != (n, 3):
            raise InvalidArgument(f"expected ({n}, 3) positions, got {p.shape}")
        k = min(self.cfg.k, n)
        if idx.shape != (n, k):
            raise InvalidArgument(f"neighbor table must be ({n}, {k}), got {idx.shape}")
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise InvalidArgument(f"neighbor indices out of range for {n} points")
        self._n = n
        self._idx = np.sort(idx, axis=1)
        return self._idx

    def _encode(self, p: np.ndarray, idx: np.ndarray, theta: MLP) -> np.ndarray:
        """(n, k, d_theta) encoding; absolute mode uses theta(p_i) + theta(p_j)."""
        p = p.astype(theta.fc1.weight.data.dtype, copy=False)
        if self.cfg.absolute:
            t = theta.forward(p)
            return t[:, None, :] + t[idx]
        return position_encoding(p[:, None, :], p[idx], theta)

    def _encode_backward(self, ddelta: np.ndarray, theta: MLP) -> None:
        if self.cfg.absolute:
            dt = ddelta.sum(axis=1) + F.scatter_neighbors(ddelta, self._idx, self._n)
            theta.backward(dt)
        else:
            theta.backward(ddelta)

    def vector_attention(self, x: np.ndarray, p: np.ndarray, idx: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        q = self.phi.forward(x)
        kf = self.psi.forward(x)
        v = self.alpha.forward(x)
        a = q[:, None, :] - kf[idx]
        vals = v[idx]
        if self.theta is not None:
            delta = self._encode(p, idx, self.theta)
            if cfg.pe_attention:
                a = a + delta
            if cfg.pe_feature:
                vals = vals + delta
        g = self.gamma.forward(a)
        w = self.rho.forward(g) if cfg.normalize == "softmax" else g
        self.weights = w
        self._vals = vals
        return (w * vals).sum(axis=1)

    def _vector_backward(self, dy: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        idx, n = self._idx, self._n
        dw = dy[:, None, :] * self._vals
        dvals = dy[:, None, :] * self.weights
        dg = self.rho.backward(dw) if cfg.normalize == "softmax" else dw
        da = self.gamma.backward(dg)
        if self.theta is not None:
            ddelta = np.zeros_like(da)
            if cfg.pe_attention:
                ddelta += da
            if cfg.pe_feature:
                ddelta += dvals
            self._encode_backward(ddelta, self.theta)
        dx = self.phi.backward(da.sum(axis=1))
        dx += self.psi.backward(F.scatter_neighbors(-da, idx, n))
        dx += self.alpha.backward(F.scatter_neighbors(dvals, idx, n))
        return dx

    def scalar_attention(self, x: np.ndarray, p: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Value vectors are alpha(x_j); the position term only shifts the logits."""
        cfg = self.cfg
        q = self.phi.forward(x)
        kf = self.psi.forward(x)
        v = self.alpha.forward(x)
        logits = np.einsum("nc,nkc->nk", q, kf[idx])
        if cfg.scaled:
            logits = logits / np.sqrt(cfg.d)
        if self.theta_scalar is not None:
            logits = logits + self._encode(p, idx, self.theta_scalar)[..., 0]
        if cfg.normalize == "softmax":
            w = self.rho.forward(logits[..., None])[..., 0]
        else:
            w = logits
        self.weights = w
        self._q, self._kn, self._vn = q, kf[idx], v[idx]
        return np.einsum("nk,nkc->nc", w, self._vn)

    def _scalar_backward(self, dy: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        idx, n = self._idx, self._n
        dw = np.einsum("nc,nkc->nk", dy, self._vn)
        dvn = self.weights[..., None] * dy[:, None, :]
        if cfg.normalize == "softmax":
            ds = self.rho.backward(dw[..., None])[..., 0]
        else:
            ds = dw
        if self.theta_scalar is not None:
            self._encode_backward(ds[..., None], self.theta_scalar)
        if cfg.scaled:
            ds = ds / np.sqrt(cfg.d)
        dq = np.einsum("nk,nkc->nc", ds, self._kn)
        dkn = ds[..., None] * self._q[:, None, :]
        dx = self.phi.backward(dq)
        dx += self.psi.backward(F.scatter_neighbors(dkn, idx, n))
        dx += self.alpha.backward(F.scatter_neighbors(dvn, idx, n))
        return dx

    def baseline_mlp(self, x: np.ndarray) -> np.ndarray:
        return self.mlp.forward(x)

    def baseline_mlp_pool(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        h = self.mlp.forward(x)
        return self.pool.forward(h[idx])

    def _pool_backward(self, dy: np.ndarray) -> np.ndarray:
        dh = F.scatter_neighbors(self.pool.backward(dy), self._idx, self._n)
        return self.mlp.backward(dh)
