"""Residual point transformer block and the transition modules between stages."""

from typing import Optional, Tuple

import numpy as np

from pointformer.attn.config import AttentionConfig
from pointformer.attn.layer import NeighborsLike, PointTransformerLayer
from pointformer.geo.points import as_positions
from pointformer.net.plan import DownPlan, UpPlan, plan_down, plan_up
from pointformer.nn import functional as F
from pointformer.nn.layers import Linear, MaxPoolNeighbors, Module, PointNorm, ReLU
from pointformer.util.errors import InvalidArgument, InvalidState


class TransformerBlock(Module):
    """y = x + linear_out(layer(linear_in(x))); coordinates pass through."""

    def __init__(
        self,
        width: int,
        attention: AttentionConfig,
        rng: np.random.Generator,
        dtype=np.float32,
        zero_init: bool = False,
    ) -> None:
        super().__init__()
        inner = attention.d
        self.width = width
        self.linear_in = self.add_child("linear_in", Linear(width, inner, rng, dtype))
        self.layer = self.add_child("layer", PointTransformerLayer(attention, rng, dtype))
        self.linear_out = self.add_child(
            "linear_out", Linear(inner, width, rng, dtype, zero=zero_init)
        )

    def forward(self, x: np.ndarray, p: np.ndarray, neighbors: NeighborsLike) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.width:
            raise InvalidArgument(f"block expects (n, {self.width}) features, got {x.shape}")
        h = self.layer.forward(self.linear_in.forward(x), p, neighbors)
        return x + self.linear_out.forward(h)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dh = self.layer.backward(self.linear_out.backward(dy))
        return dy + self.linear_in.backward(dh)


class UnitMLP(Module):
    """linear -> PointNorm -> ReLU, pointwise."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.linear = self.add_child("linear", Linear(d_in, d_out, rng, dtype))
        self.norm = self.add_child("norm", PointNorm(d_out, dtype))
        self.act = self.add_child("act", ReLU())

    def forward(self, x: np.ndarray) -> np.ndarray:
        # a single point has no batch statistics
        h = self.norm.forward(self.linear.forward(x), use_running=x.shape[0] < 2)
        return self.act.forward(h)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return self.linear.backward(self.norm.backward(self.act.backward(dy)))


class TransitionDown(Module):
    """
    Pointwise linear -> norm -> ReLU, then (rate > 1) max pooling onto each FPS-sampled
    point from its k nearest input points.
    """

    def __init__(
        self, d_in: int, d_out: int, rate: int, k: int, rng: np.random.Generator, dtype=np.float32
    ) -> None:
        super().__init__()
        self.rate = rate
        self.k = k
        self.mlp = self.add_child("mlp", UnitMLP(d_in, d_out, rng, dtype))
        if rate > 1:
            self.pool = self.add_child("pool", MaxPoolNeighbors())

    def forward(self, x: np.ndarray, plan: Optional[DownPlan]) -> np.ndarray:
        if (plan is None) != (self.rate == 1):
            raise InvalidState(f"rate-{self.rate} transition got a mismatched sampling plan")
        h = self.mlp.forward(x)
        if plan is None:
            return h
        if plan.pool.max() >= len(x):
            raise InvalidState("pooling table does not index this stage's points")
        self._pool_idx, self._n = plan.pool, len(x)
        return self.pool.forward(h[plan.pool])

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self.rate > 1:
            dy = F.scatter_neighbors(self.pool.backward(dy), self._pool_idx, self._n)
        return self.mlp.backward(dy)

    def transition_down(
        self, x: np.ndarray, p: np.ndarray, start: int = 0
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Plan and run one transition: returns (features, positions) of the sampled set."""
        pos = as_positions(p)
        plan = plan_down(pos, self.rate, self.k, start)
        out = self.forward(x, plan)
        return out, pos if plan is None else pos[plan.sampled]


class TransitionUp(Module):
    """
    Coarse features through linear -> norm -> ReLU, interpolated onto the finer set, plus
    a linear map of the finer set's skip features.
    """

    def __init__(self, d_coarse: int, d_fine: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.mlp = self.add_child("mlp", UnitMLP(d_coarse, d_fine, rng, dtype))
        self.skip = self.add_child("skip", Linear(d_fine, d_fine, rng, dtype))

    def forward(self, x2: np.ndarray, x1_skip: np.ndarray, plan: UpPlan) -> np.ndarray:
        if len(x2) != plan.n_coarse or len(x1_skip) != len(plan.indices):
            raise InvalidState(
                f"stage pairing mismatch: {len(x2)} -> {len(x1_skip)} points, plan expects "
                f"{plan.n_coarse} -> {len(plan.indices)}"
            )
        h = self.mlp.forward(x2)
        self._plan = plan
        up = np.einsum("tp,tpc->tc", plan.weights.astype(h.dtype, copy=False), h[plan.indices])
        return up + self.skip.forward(x1_skip)

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Returns (d_coarse, d_skip)."""
        plan = self._plan
        w = plan.weights.astype(dy.dtype, copy=False)
        dh = F.scatter_neighbors(w[..., None] * dy[:, None, :], plan.indices, plan.n_coarse)
        return self.mlp.backward(dh), self.skip.backward(dy)

    def transition_up(
        self, x2: np.ndarray, p2: np.ndarray, x1_skip: np.ndarray, p1: np.ndarray
    ) -> np.ndarray:
        """Plan and run one transition from the coarse set (x2, p2) onto (x1_skip, p1)."""
        return self.forward(x2, x1_skip, plan_up(as_positions(p2), as_positions(p1)))
