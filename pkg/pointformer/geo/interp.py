from typing import Tuple

import numpy as np

from pointformer.geo.knn import knn_search
from pointformer.geo.points import PointSet, PointsLike, as_positions
from pointformer.util.errors import InvalidArgument, InvalidInput

EPS = 1e-8


def interpolation_weights(
    source: PointsLike, targets: PointsLike, p: int = 3, eps: float = EPS
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Neighbor indices (n_t, p) into the source set and normalized inverse squared
    distance weights (n_t, p) for every target point.
    """
    src = as_positions(source)
    if p < 1 or p > len(src):
        raise InvalidArgument(f"p must be in [1, {len(src)}], got {p}")
    table = knn_search(src, targets, p)
    w = 1.0 / (table.sq_dists + eps)
    w /= w.sum(axis=1, keepdims=True)
    return table.indices, w


def interpolate(source: PointSet, targets: PointsLike, p: int = 3, eps: float = EPS) -> np.ndarray:
    """
    Inverse squared distance weighted average of the p nearest source features,
    w_j = (1 / (d_j^2 + eps)) / sum, evaluated at every target point.
    """
    if not isinstance(source, PointSet) or source.features is None:
        raise InvalidInput("interpolate needs a source PointSet with features")
    idx, w = interpolation_weights(source, as_positions(targets), p, eps)
    return np.einsum("tp,tpc->tc", w, source.features[idx])
