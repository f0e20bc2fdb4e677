"""
Exact k-nearest-neighbor selection with bounded max-heaps.

Every query keeps a size-k max-heap keyed on (squared distance, index). Candidates are
scanned once in ascending index order; a candidate replaces the heap root only when it is
strictly closer, so equal distances keep the smaller index. When the queries are the points
themselves, each query is moved to the front of its own row even if a duplicate point with a
smaller index sits at the same zero distance.

The heaps of a block of queries are stored as (B, k) arrays. They start from the first k
candidates in sorted order; every later chunk is prefiltered against the current roots and
the surviving candidates are inserted in rounds, one per heap per round, in index order.
"""

import numpy as np

from pointformer.geo.points import NeighborTable, PointsLike, as_positions, pairwise_sq_dists
from pointformer.util.errors import InvalidArgument

QUERY_BLOCK = 2048
CANDIDATE_CHUNK = 1024


def knn_search(
    points: PointsLike,
    queries: PointsLike,
    k: int,
    include_self: bool = True,
    query_block: int = QUERY_BLOCK,
    candidate_chunk: int = CANDIDATE_CHUNK,
) -> NeighborTable:
    """
    k nearest points for every query, sorted ascending by (squared distance, index).

    With include_self=False the queries must be the points themselves and each row
    omits its own index. With include_self=True and queries equal to the points, row i
    starts with i.
    """
    pts = as_positions(points)
    qs = as_positions(queries)
    n = len(pts)
    limit = n if include_self else n - 1
    if k < 1 or k > limit:
        raise InvalidArgument(f"k must be in [1, {limit}] for {n} points, got {k}")
    if not include_self and len(qs) != n:
        raise InvalidArgument("include_self=False requires the queries to be the points")
    if qs.dtype != pts.dtype:
        qs = qs.astype(pts.dtype)

    m = len(qs)
    out_idx = np.empty((m, k), dtype=np.int64)
    out_d = np.empty((m, k), dtype=pts.dtype)
    for start in range(0, m, query_block):
        stop = min(start + query_block, m)
        exclude = None if include_self else np.arange(start, stop)
        idx, d = _heap_select(pts, qs[start:stop], k, exclude, candidate_chunk)
        out_idx[start:stop] = idx
        out_d[start:stop] = d
    if include_self and _is_self_query(pts, qs):
        _self_first(out_idx, out_d)
    return NeighborTable(out_idx, out_d)


def knn_brute_force(points: PointsLike, queries: PointsLike, k: int) -> NeighborTable:
    """Reference kNN: full distance matrix and a stable sort per row."""
    pts = as_positions(points)
    qs = as_positions(queries).astype(pts.dtype, copy=False)
    if k < 1 or k > len(pts):
        raise InvalidArgument(f"k must be in [1, {len(pts)}] for {len(pts)} points, got {k}")
    d = pairwise_sq_dists(qs, pts)
    order = np.argsort(d, axis=1, kind="stable")[:, :k].astype(np.int64)
    dists = np.take_along_axis(d, order, axis=1)
    if _is_self_query(pts, qs):
        _self_first(order, dists)
    return NeighborTable(order, dists)


def _is_self_query(pts: np.ndarray, qs: np.ndarray) -> bool:
    return qs is pts or (qs.shape == pts.shape and np.array_equal(qs, pts))


def _self_first(indices: np.ndarray, sq_dists: np.ndarray) -> None:
    """Move i to slot 0 of row i; only rows with zero-distance duplicates need it."""
    own = np.arange(len(indices))
    for i in np.flatnonzero(indices[:, 0] != own):
        row = indices[i]
        hit = np.flatnonzero(row == i)
        # entries ahead of i are duplicates at distance 0; without i the row is all of them
        p = int(hit[0]) if hit.size else len(row) - 1
        row[1 : p + 1] = row[:p].copy()
        row[0] = i
        sq_dists[i, 1 : p + 1] = sq_dists[i, :p].copy()
        sq_dists[i, 0] = 0


def _heap_select(pts, qs, k, exclude, chunk):
    n = len(pts)
    rows_all = np.arange(len(qs))
    # A row sorted in descending (distance, index) order is already a valid max-heap.
    heap_d = _block_dists(qs, pts, 0, k, exclude)
    heap_i = np.broadcast_to(np.arange(k, dtype=np.int64), heap_d.shape).copy()
    order = np.lexsort((-heap_i, -heap_d), axis=-1)
    heap_d = np.take_along_axis(heap_d, order, axis=1)
    heap_i = np.take_along_axis(heap_i, order, axis=1)
    for c0 in range(k, n, chunk):
        dist = _block_dists(qs, pts, c0, min(c0 + chunk, n), exclude)
        # Roots only shrink, so this mask is a superset of the real insertions.
        rows, cols = np.nonzero(dist < heap_d[:, :1])
        if not rows.size:
            continue
        # rank of each candidate within its row, in ascending index order
        starts = np.searchsorted(rows, rows_all)
        rank = np.arange(rows.size) - starts[rows]
        by_rank = np.argsort(rank, kind="stable")
        bounds = np.cumsum(np.bincount(rank))
        lo = 0
        for hi in bounds:
            sel = by_rank[lo:hi]
            lo = hi
            r, col = rows[sel], cols[sel]
            d = dist[r, col]
            ok = d < heap_d[r, 0]
            if ok.any():
                _replace_root(heap_d, heap_i, r[ok], d[ok], c0 + col[ok])
    order = np.lexsort((heap_i, heap_d), axis=-1)
    return np.take_along_axis(heap_i, order, axis=1), np.take_along_axis(heap_d, order, axis=1)


def _block_dists(qs, pts, c0, c1, exclude):
    dist = pairwise_sq_dists(qs, pts[c0:c1])
    if exclude is not None:
        own = (exclude >= c0) & (exclude < c1)
        dist[np.flatnonzero(own), exclude[own] - c0] = np.inf
    return dist


def _greater(da, ia, db, ib):
    return (da > db) | ((da == db) & (ia > ib))


def _replace_root(heap_d, heap_i, rows, item_d, item_i) -> None:
    """Replace the root of each listed heap by (item_d, item_i) and sift it down."""
    k = heap_d.shape[1]
    item_i = np.broadcast_to(np.asarray(item_i, dtype=np.int64), rows.shape)
    pos = np.zeros(rows.size, dtype=np.intp)
    live = np.arange(rows.size)
    while live.size:
        r = rows[live]
        p = pos[live]
        child = 2 * p + 1
        inside = child < k
        live, r, p, child = live[inside], r[inside], p[inside], child[inside]
        if not live.size:
            break
        right = child + 1
        has_right = right < k
        right = np.where(has_right, right, child)
        take_right = has_right & _greater(
            heap_d[r, right], heap_i[r, right], heap_d[r, child], heap_i[r, child]
        )
        child = np.where(take_right, right, child)
        move = _greater(heap_d[r, child], heap_i[r, child], item_d[live], item_i[live])
        live, r, p, child = live[move], r[move], p[move], child[move]
        heap_d[r, p] = heap_d[r, child]
        heap_i[r, p] = heap_i[r, child]
        pos[live] = child
    heap_d[rows, pos] = item_d
    heap_i[rows, pos] = item_i
