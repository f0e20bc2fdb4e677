"""
Finite-difference checks over every layer type, every attention variant and both
end-to-end networks, in 64-bit precision.
"""

import itertools
import logging
from typing import Callable, List, Optional

import numpy as np

from pointformer.attn.config import NORMALIZERS, OPERATORS, POS_MODES, AttentionConfig
from pointformer.attn.layer import PointTransformerLayer, PositionEncoding
from pointformer.geo.knn import knn_search
from pointformer.harness.loss import CrossEntropy
from pointformer.net.backbone import PointTransformerNet
from pointformer.net.blocks import TransformerBlock, TransitionDown, TransitionUp
from pointformer.net.config import BackboneConfig
from pointformer.net.plan import GeometryPlan, plan_down, plan_up
from pointformer.nn.gradcheck import DEFAULT_TOL, GradCheckReport, away_from_kinks, grad_check
from pointformer.nn.layers import (
    MLP,
    GlobalAvgPool,
    Linear,
    MaxPoolNeighbors,
    Module,
    PointNorm,
    ReLU,
    SoftmaxNeighbors,
)

logger = logging.getLogger(__name__)

NETWORK_TOL = 1e-3
F64 = np.float64


class PlannedNetwork(Module):
    """A network bound to one cloud's geometry: forward(features) -> logits."""

    def __init__(self, net: PointTransformerNet, plan: GeometryPlan) -> None:
        super().__init__()
        self.net = self.add_child("net", net)
        self.plan = plan

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.net.forward(x, self.plan)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return self.net.backward(dy)


def layer_checks(rng: np.random.Generator, tol: float) -> List[GradCheckReport]:
    def check(component, module, inputs, wrt=(0,), tol=tol) -> GradCheckReport:
        return grad_check(
            module, inputs, wrt=wrt, tol=tol, seed=int(rng.integers(1 << 31)), component=component
        )

    reports = [
        check("linear", Linear(8, 4, rng, F64), [rng.standard_normal((5, 8))], tol=min(tol, 1e-6)),
        check("relu", ReLU(), [away_from_kinks(rng.standard_normal((6, 4)), rng)]),
        check("mlp", MLP(4, 5, 3, rng, F64), [rng.standard_normal((6, 4))]),
        check("softmax_over_neighbors", SoftmaxNeighbors(), [rng.standard_normal((4, 3, 2))]),
        check("max_pool_neighbors", MaxPoolNeighbors(), [rng.standard_normal((4, 3, 2))]),
        check("global_avg_pool", GlobalAvgPool(), [rng.standard_normal((6, 3))]),
        check("point_norm", PointNorm(3, F64), [rng.standard_normal((6, 3))]),
        check(
            "position_encoding",
            PositionEncoding(6, 6, rng, F64),
            [rng.standard_normal((8, 4, 3)), rng.standard_normal((8, 4, 3))],
            wrt=(),
        ),
        check(
            "cross_entropy",
            CrossEntropy(rng.integers(0, 4, size=6)),
            [rng.standard_normal((6, 4))],
            tol=min(tol, 1e-6),
        ),
    ]

    n, k, d = 8, 4, 6
    p = rng.standard_normal((n, 3))
    nbrs = knn_search(p, p, k).indices
    block = TransformerBlock(d, AttentionConfig(d=d, k=k), rng, F64)
    reports.append(check("transformer_block", block, [rng.standard_normal((n, d)), p, nbrs]))

    down = TransitionDown(d, 5, 4, k, rng, F64)
    down_plan = plan_down(rng.standard_normal((16, 3)), 4, k)
    reports.append(check("transition_down", down, [rng.standard_normal((16, d)), down_plan]))
    fine = rng.standard_normal((n, 3))
    up = TransitionUp(5, d, rng, F64)
    reports.append(
        check(
            "transition_up",
            up,
            [rng.standard_normal((3, 5)), rng.standard_normal((n, d)), plan_up(fine[:3], fine)],
            wrt=(0, 1),
        )
    )
    return reports


def attention_checks(rng: np.random.Generator, tol: float) -> List[GradCheckReport]:
    """All operator x position mode x normalizer combinations on n=8, k=4, d=6."""
    n, k, d = 8, 4, 6
    reports = []
    for operator, pos_mode, normalize in itertools.product(OPERATORS, POS_MODES, NORMALIZERS):
        cfg = AttentionConfig(d=d, k=k, operator=operator, pos_mode=pos_mode, normalize=normalize)
        p = rng.standard_normal((n, 3))
        nbrs = knn_search(p, p, k).indices
        layer = PointTransformerLayer(cfg, rng, F64)
        reports.append(
            grad_check(
                layer,
                [rng.standard_normal((n, d)), p, nbrs],
                tol=tol,
                seed=int(rng.integers(1 << 31)),
                component="attention",
                variant=cfg.label(),
            )
        )
    return reports


def network_checks(rng: np.random.Generator, tol: float = NETWORK_TOL) -> List[GradCheckReport]:
    """End-to-end checks on N=64, widths [8, 8, 8, 8, 8], 3 classes."""
    reports = []
    for head in ("segmentation", "classification"):
        cfg = BackboneConfig.from_lists(widths=[8] * 5, head=head, num_classes=3)
        net = PointTransformerNet(cfg, seed=int(rng.integers(1 << 31)), dtype=F64)
        positions = rng.uniform(size=(cfg.min_points, 3))
        planned = PlannedNetwork(net, net.plan(positions))
        reports.append(
            grad_check(
                planned,
                [positions.copy()],
                tol=tol,
                seed=int(rng.integers(1 << 31)),
                component="network",
                variant=head,
            )
        )
    return reports


def run_grad_suite(
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    network_tol: float = NETWORK_TOL,
    on_report: Optional[Callable[[GradCheckReport], None]] = None,
) -> List[GradCheckReport]:
    rng = np.random.default_rng(seed)
    reports: List[GradCheckReport] = []
    for group in (
        lambda: layer_checks(rng, tol),
        lambda: attention_checks(rng, tol),
        lambda: network_checks(rng, network_tol),
    ):
        for report in group():
            reports.append(report)
            if on_report:
                on_report(report)
    failed = [r for r in reports if not r.passed]
    logger.info(f"gradient suite: {len(reports) - len(failed)}/{len(reports)} passed")
    return reports
