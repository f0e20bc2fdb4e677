from pointformer.geo.interp import interpolate, interpolation_weights
from pointformer.geo.knn import knn_brute_force, knn_search
from pointformer.geo.points import NeighborTable, PointSet, SampleResult, as_positions
from pointformer.geo.sampling import fps_sample

__all__ = [
    "NeighborTable",
    "PointSet",
    "SampleResult",
    "as_positions",
    "fps_sample",
    "interpolate",
    "interpolation_weights",
    "knn_brute_force",
    "knn_search",
]
