import numpy as np

from pointformer.geo.points import PointsLike, SampleResult, as_positions, pairwise_sq_dists
from pointformer.util.errors import InvalidArgument


def fps_sample(points: PointsLike, m: int, start: int = 0) -> SampleResult:
    """
    Farthest point sampling (greedy maxmin).

    selected[0] = start; every later pick maximizes the squared distance to the points
    already selected, ties going to the smaller index. Deterministic in (points, m, start).
    """
    pts = as_positions(points)
    n = len(pts)
    if m < 1 or m > n:
        raise InvalidArgument(f"m must be in [1, {n}], got {m}")
    if not 0 <= start < n:
        raise InvalidArgument(f"start must be a valid index in [0, {n}), got {start}")

    selected = np.empty(m, dtype=np.int64)
    selected[0] = start
    min_d = _sq_dists_to(pts, start)
    min_d[start] = -np.inf
    for t in range(1, m):
        # argmax returns the first maximum: smaller index wins ties
        nxt = int(np.argmax(min_d))
        selected[t] = nxt
        np.minimum(min_d, _sq_dists_to(pts, nxt), out=min_d)
        min_d[nxt] = -np.inf
    min_d[selected] = 0.0
    return SampleResult(selected, min_d)


def _sq_dists_to(pts: np.ndarray, i: int) -> np.ndarray:
    return pairwise_sq_dists(pts[i : i + 1], pts)[0]
