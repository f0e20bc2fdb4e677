"""Point set and neighbor table containers."""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from pointformer.util.errors import InvalidArgument, InvalidInput


@dataclass
class PointSet:
    """
    N 3D coordinates with optional per-point features and integer labels.

    positions: (N, 3) real coordinates.
    features: optional (N, d) real features.
    labels: optional (N,) integer class ids.
    """

    positions: np.ndarray
    features: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.positions = as_positions(self.positions)
        n = len(self.positions)
        if self.features is not None:
            self.features = np.asarray(self.features)
            if self.features.ndim != 2 or self.features.shape[0] != n:
                raise InvalidInput(
                    f"features must be ({n}, d), got shape {self.features.shape}"
                )
            if not np.all(np.isfinite(self.features)):
                raise InvalidInput("features contain non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (n,) or not np.issubdtype(self.labels.dtype, np.integer):
                raise InvalidInput(f"labels must be ({n},) integers, got {self.labels.shape}")

    def __len__(self) -> int:
        return len(self.positions)

    def subset(self, indices: np.ndarray) -> "PointSet":
        return PointSet(
            self.positions[indices],
            None if self.features is None else self.features[indices],
            None if self.labels is None else self.labels[indices],
        )

    def permuted(self, perm: np.ndarray) -> "PointSet":
        """Reorder points so that new point i is old point perm[i]."""
        return self.subset(np.asarray(perm))

    def translated(self, offset) -> "PointSet":
        return PointSet(self.positions + np.asarray(offset), self.features, self.labels)


@dataclass
class NeighborTable:
    """
    For each of N query points, k neighbor indices and squared distances,
    rows sorted ascending by (distance, index).
    """

    indices: np.ndarray
    sq_dists: np.ndarray

    def __post_init__(self) -> None:
        if self.indices.shape != self.sq_dists.shape or self.indices.ndim != 2:
            raise InvalidArgument(
                f"indices {self.indices.shape} and sq_dists {self.sq_dists.shape} must match"
            )

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def __len__(self) -> int:
        return self.indices.shape[0]


@dataclass
class SampleResult:
    """
    Farthest point sampling output.

    selected: (M,) distinct indices into the source set, in selection order.
    min_dists: (N,) squared distance of every source point to the selected set.
    """

    selected: np.ndarray
    min_dists: np.ndarray

    def __len__(self) -> int:
        return len(self.selected)


PointsLike = Union[PointSet, np.ndarray]


def as_positions(points: PointsLike) -> np.ndarray:
    """(N, 3) finite coordinate array from a PointSet or array."""
    pos = points.positions if isinstance(points, PointSet) else np.asarray(points)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise InvalidInput(f"positions must be (N, 3), got shape {pos.shape}")
    if len(pos) < 1:
        raise InvalidInput("a point set needs at least one point")
    if not np.issubdtype(pos.dtype, np.floating):
        pos = pos.astype(np.float64)
    if not np.all(np.isfinite(pos)):
        raise InvalidInput("positions contain non-finite coordinates")
    return pos


def pairwise_sq_dists(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """(m, n) squared Euclidean distances, summed x, y, z in that order."""
    diff = queries[:, None, :] - points[None, :, :]
    d = diff[..., 0] * diff[..., 0]
    d += diff[..., 1] * diff[..., 1]
    d += diff[..., 2] * diff[..., 2]
    return d
