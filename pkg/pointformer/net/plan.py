"""
Geometry of a cloud as seen by every stage of a network.

Coordinates never change during training, so sampling, neighbor tables and interpolation
weights are computed once per cloud and reused by every forward pass.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from pointformer.geo.interp import interpolation_weights
from pointformer.geo.knn import knn_search
from pointformer.geo.points import PointsLike, as_positions
from pointformer.geo.sampling import fps_sample
from pointformer.net.config import BackboneConfig
from pointformer.util.errors import InvalidArgument

logger = logging.getLogger(__name__)

INTERP_NEIGHBORS = 3


@dataclass
class DownPlan:
    """sampled: (m,) indices into the previous stage; pool: (m, k) neighbors in it."""

    sampled: np.ndarray
    pool: np.ndarray


@dataclass
class UpPlan:
    """Interpolation from a coarse stage (n_coarse points) onto the finer one."""

    indices: np.ndarray
    weights: np.ndarray
    n_coarse: int


@dataclass
class GeometryPlan:
    positions: List[np.ndarray]
    neighbors: List[np.ndarray]
    down: List[Optional[DownPlan]]
    up: List[Optional[UpPlan]]

    @property
    def cardinalities(self) -> List[int]:
        return [len(p) for p in self.positions]


def plan_down(positions: np.ndarray, rate: int, k: int, start: int = 0) -> Optional[DownPlan]:
    """FPS subset of ceil(n / rate) points, each pooling from its k nearest input points."""
    if rate == 1:
        return None
    n = len(positions)
    m = max(1, -(-n // rate))
    sampled = fps_sample(positions, m, start).selected
    pool = knn_search(positions, positions[sampled], min(k, n)).indices
    return DownPlan(sampled, pool)


def plan_up(coarse: np.ndarray, fine: np.ndarray) -> UpPlan:
    idx, w = interpolation_weights(coarse, fine, min(INTERP_NEIGHBORS, len(coarse)))
    return UpPlan(idx, w, len(coarse))


def plan_geometry(positions: PointsLike, cfg: BackboneConfig, start: int = 0) -> GeometryPlan:
    """
    Per-stage positions, kNN tables, sampling/pooling tables and interpolation weights.

    `start` is the FPS start index into the input cloud for the first sampling stage;
    later stages start from their first point, which is the previous stage's start.
    """
    pos = as_positions(positions)
    n = len(pos)
    if n < cfg.min_points:
        raise InvalidArgument(
            f"{n} points is too few for {len(cfg.stages)} stages; minimum N is {cfg.min_points}"
        )
    if not 0 <= start < n:
        raise InvalidArgument(f"FPS start must be in [0, {n}), got {start}")

    stage_pos: List[np.ndarray] = []
    neighbors: List[np.ndarray] = []
    down: List[Optional[DownPlan]] = []
    up: List[Optional[UpPlan]] = []
    current = pos
    first_sampling = True
    for s, stage in enumerate(cfg.stages):
        d = plan_down(current, stage.downsample, cfg.k, start if first_sampling else 0)
        if d is not None:
            first_sampling = False
            coarse = current[d.sampled]
            up.append(plan_up(coarse, current) if s > 0 else None)
            current = coarse
        else:
            up.append(plan_up(current, stage_pos[-1]) if s > 0 else None)
        down.append(d)
        stage_pos.append(current)
        neighbors.append(knn_search(current, current, min(cfg.k, len(current))).indices)
    logger.debug(f"geometry plan for {n} points: {[len(p) for p in stage_pos]}")
    return GeometryPlan(stage_pos, neighbors, down, up)
