"""
The point transformer networks.

Encoder stage s: transition down (pointwise for rate 1) followed by the stage's blocks.
Segmentation adds a symmetric decoder: each decoder stage interpolates the coarser stage's
features onto the encoder stage of the same cardinality, adds that stage's features, and
runs its own blocks; a per-point head maps to logits. Classification pools the deepest
features globally and maps them to one logit row.
"""

import logging
from typing import List, Optional

import numpy as np

from pointformer.geo.points import PointSet
from pointformer.net.blocks import TransformerBlock, TransitionDown, TransitionUp, UnitMLP
from pointformer.net.config import BackboneConfig
from pointformer.net.plan import GeometryPlan, plan_geometry
from pointformer.nn.layers import GlobalAvgPool, Linear, Module, ReLU
from pointformer.util.errors import InvalidArgument

logger = logging.getLogger(__name__)


class Stage(Module):
    def __init__(self, blocks: List[TransformerBlock]) -> None:
        super().__init__()
        self.blocks = [self.add_child(f"block{i}", b) for i, b in enumerate(blocks)]

    def forward(self, x: np.ndarray, p: np.ndarray, neighbors: np.ndarray) -> np.ndarray:
        for block in self.blocks:
            x = block.forward(x, p, neighbors)
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for block in reversed(self.blocks):
            dy = block.backward(dy)
        return dy


class SegmentationHead(Module):
    """linear -> norm -> ReLU -> linear, per point."""

    def __init__(self, width: int, num_classes: int, rng, dtype=np.float32) -> None:
        super().__init__()
        self.hidden = self.add_child("hidden", UnitMLP(width, width, rng, dtype))
        self.out = self.add_child("out", Linear(width, num_classes, rng, dtype))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.out.forward(self.hidden.forward(x))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return self.hidden.backward(self.out.backward(dy))


class ClassificationHead(Module):
    """Global average pool -> linear -> ReLU -> linear."""

    def __init__(self, width: int, num_classes: int, rng, dtype=np.float32) -> None:
        super().__init__()
        self.pool = self.add_child("pool", GlobalAvgPool())
        self.fc1 = self.add_child("fc1", Linear(width, width, rng, dtype))
        self.act = self.add_child("act", ReLU())
        self.fc2 = self.add_child("fc2", Linear(width, num_classes, rng, dtype))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.fc2.forward(self.act.forward(self.fc1.forward(self.pool.forward(x))))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return self.pool.backward(self.fc1.backward(self.act.backward(self.fc2.backward(dy))))


class PointTransformerNet(Module):
    def __init__(self, cfg: BackboneConfig, seed: int = 0, dtype=np.float32) -> None:
        super().__init__()
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)

        self.downs: List[TransitionDown] = []
        self.enc: List[Stage] = []
        d_prev = cfg.in_channels
        for s, stage in enumerate(cfg.stages):
            down = TransitionDown(d_prev, stage.width, stage.downsample, cfg.k, rng, dtype)
            self.downs.append(self.add_child(f"enc{s}_down", down))
            self.enc.append(self.add_child(f"enc{s}", self._stage(stage.width, stage.blocks, rng)))
            d_prev = stage.width

        self.ups: List[TransitionUp] = []
        self.dec: List[Stage] = []
        if cfg.head == "segmentation":
            # decoder s sits at encoder stage s's cardinality, s = S-2 .. 0
            for s in range(len(cfg.stages) - 2, -1, -1):
                stage = cfg.stages[s]
                up = TransitionUp(cfg.stages[s + 1].width, stage.width, rng, dtype)
                self.ups.insert(0, self.add_child(f"dec{s}_up", up))
                self.dec.insert(
                    0, self.add_child(f"dec{s}", self._stage(stage.width, stage.blocks, rng))
                )
            self.head = self.add_child(
                "head", SegmentationHead(cfg.stages[0].width, cfg.num_classes, rng, dtype)
            )
        else:
            self.head = self.add_child(
                "head", ClassificationHead(cfg.stages[-1].width, cfg.num_classes, rng, dtype)
            )
        logger.debug(
            f"{cfg.head} network: widths {cfg.widths}, {self.parameters().total_size()} weights"
        )

    def _stage(self, width: int, blocks: int, rng) -> Stage:
        attn = self.cfg.stage_attention(width)
        return Stage(
            [
                TransformerBlock(width, attn, rng, self.dtype, self.cfg.zero_init_residual)
                for _ in range(blocks)
            ]
        )

    def plan(self, cloud, start: int = 0) -> GeometryPlan:
        positions = cloud.positions if isinstance(cloud, PointSet) else cloud
        return plan_geometry(positions, self.cfg, start)

    def input_features(self, cloud: PointSet) -> np.ndarray:
        """The cloud's features, or its coordinates when it carries none."""
        x = cloud.positions if cloud.features is None else cloud.features
        if x.shape[1] != self.cfg.in_channels:
            raise InvalidArgument(
                f"network expects {self.cfg.in_channels} input channels, got {x.shape[1]}"
            )
        return x.astype(self.dtype, copy=False)

    def encode(self, x: np.ndarray, plan: GeometryPlan) -> List[np.ndarray]:
        feats = []
        for s, (down, stage) in enumerate(zip(self.downs, self.enc)):
            x = down.forward(x, plan.down[s])
            x = stage.forward(x, plan.positions[s], plan.neighbors[s])
            feats.append(x)
        return feats

    def forward(self, x: np.ndarray, plan: GeometryPlan) -> np.ndarray:
        """Logits for input features x (N, in_channels) of the planned cloud."""
        if x.shape != (plan.cardinalities[0], self.cfg.in_channels):
            raise InvalidArgument(
                f"features {x.shape} do not match the plan's {plan.cardinalities[0]} points"
            )
        feats = self.encode(x.astype(self.dtype, copy=False), plan)
        if self.cfg.head == "classification":
            return self.head.forward(feats[-1])
        y = feats[-1]
        for s in range(len(self.dec) - 1, -1, -1):
            y = self.ups[s].forward(y, feats[s], plan.up[s + 1])
            y = self.dec[s].forward(y, plan.positions[s], plan.neighbors[s])
        return self.head.forward(y)

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        """Accumulates parameter gradients; returns the gradient of the input features."""
        n_stages = len(self.enc)
        dfeats: List[Optional[np.ndarray]] = [None] * n_stages
        dy = self.head.backward(dlogits)
        for s in range(len(self.dec)):
            dy = self.dec[s].backward(dy)
            dy, dskip = self.ups[s].backward(dy)
            dfeats[s] = dskip
        dfeats[-1] = dy if dfeats[-1] is None else dfeats[-1] + dy

        g = dfeats[-1]
        for s in range(n_stages - 1, -1, -1):
            g = self.downs[s].backward(self.enc[s].backward(g))
            if s > 0 and dfeats[s - 1] is not None:
                g = g + dfeats[s - 1]
        return g

    def forward_segmentation(
        self, cloud: PointSet, plan: Optional[GeometryPlan] = None, start: int = 0
    ) -> np.ndarray:
        """(N, num_classes) logits in input point order."""
        if self.cfg.head != "segmentation":
            raise InvalidArgument("this network was built with a classification head")
        plan = plan or self.plan(cloud, start)
        return self.forward(self.input_features(cloud), plan)

    def forward_classification(
        self, cloud: PointSet, plan: Optional[GeometryPlan] = None, start: int = 0
    ) -> np.ndarray:
        """(1, num_classes) logits for the whole cloud."""
        if self.cfg.head != "classification":
            raise InvalidArgument("this network was built with a segmentation head")
        plan = plan or self.plan(cloud, start)
        return self.forward(self.input_features(cloud), plan)
