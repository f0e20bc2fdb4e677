"""
Synthetic labeled point clouds built from planes, spheres and boxes.

Three task shapes share one generator spec:

    gen_scene          one scene, one primitive per class, per-point class labels
    gen_shapes         `count` clouds holding a single primitive; the category is the label
    gen_part_objects   `count` two-part objects; category c owns part labels 2c and 2c+1
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from pointformer.attn.config import DEFAULT_K
from pointformer.geo.points import PointSet
from pointformer.util.errors import InvalidArgument

logger = logging.getLogger(__name__)

PRIMITIVES = ("plane", "sphere", "box")
LAYOUTS = ("stacked", "scattered")


@dataclass(frozen=True)
class SceneSpec:
    num_points: int = 512
    num_classes: int = 3
    noise: float = 0.01
    seed: int = 0
    layout: str = "stacked"
    primitives: Tuple[str, ...] = PRIMITIVES
    spacing: float = 1.0
    count: int = 1

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise InvalidArgument(f"a scene needs at least 2 classes, got {self.num_classes}")
        if self.noise < 0:
            raise InvalidArgument(f"noise must be >= 0, got {self.noise}")
        if self.layout not in LAYOUTS:
            raise InvalidArgument(f"layout must be one of {LAYOUTS}, got {self.layout}")
        if not self.primitives or any(p not in PRIMITIVES for p in self.primitives):
            raise InvalidArgument(f"primitives must be drawn from {PRIMITIVES}")
        if self.spacing <= 0:
            raise InvalidArgument(f"spacing must be > 0, got {self.spacing}")
        if self.count < 1:
            raise InvalidArgument(f"count must be >= 1, got {self.count}")

    def class_counts(self) -> List[int]:
        """num_points split evenly; the first num_points % num_classes classes get one more."""
        base, extra = divmod(self.num_points, self.num_classes)
        return [base + (1 if c < extra else 0) for c in range(self.num_classes)]


@dataclass
class SyntheticScene:
    cloud: PointSet
    spec: SceneSpec
    category: Optional[int] = None

    @property
    def labels(self) -> np.ndarray:
        return self.cloud.labels


def sample_primitive(kind: str, n: int, size: float, rng: np.random.Generator) -> np.ndarray:
    """n points on a primitive of the given size, centered at the origin."""
    if kind == "plane":
        xy = rng.uniform(-0.5, 0.5, size=(n, 2)) * size
        return np.column_stack([xy, np.zeros(n)])
    if kind == "sphere":
        v = rng.standard_normal((n, 3))
        v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)
        return v * 0.3 * size
    half = 0.25 * size
    pts = rng.uniform(-half, half, size=(n, 3))
    # push one coordinate of each point onto a face
    axis = rng.integers(0, 3, size=n)
    side = np.where(rng.random(n) < 0.5, -half, half)
    pts[np.arange(n), axis] = side
    return pts


def _jitter(points: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    if noise == 0:
        return points
    return points + rng.normal(0.0, noise, size=points.shape)


def _check_feasible(spec: SceneSpec, parts: int, k: int) -> None:
    per_class = spec.num_points // parts
    if per_class < k:
        raise InvalidArgument(
            f"{spec.num_points} points over {parts} classes leaves {per_class} per class, "
            f"fewer than k={k}"
        )


def gen_scene(spec: SceneSpec, k: int = DEFAULT_K) -> SyntheticScene:
    """
    One scene with one primitive per class. `stacked` puts class c at height c * spacing;
    `scattered` puts the classes on shuffled cells of a square grid, with the primitive
    kind cycling through `primitives` and the size growing each full cycle.
    """
    _check_feasible(spec, spec.num_classes, k)
    rng = np.random.default_rng(spec.seed)
    side = int(np.ceil(np.sqrt(spec.num_classes)))
    cells = rng.permutation(side * side)[: spec.num_classes]
    chunks, labels = [], []
    for c, n in enumerate(spec.class_counts()):
        kind = spec.primitives[c % len(spec.primitives)]
        if spec.layout == "stacked":
            pts = sample_primitive(kind, n, 1.0, rng) + [0.0, 0.0, c * spec.spacing]
        else:
            size = 1.0 + 0.5 * (c // len(spec.primitives))
            row, col = divmod(int(cells[c]), side)
            offset = [col * spec.spacing * 2.0, row * spec.spacing * 2.0, 0.0]
            pts = sample_primitive(kind, n, size, rng) + offset
        chunks.append(_jitter(pts, spec.noise, rng))
        labels.append(np.full(n, c, dtype=np.int64))
    order = rng.permutation(spec.num_points)
    positions = np.concatenate(chunks)[order]
    cloud = PointSet(positions, labels=np.concatenate(labels)[order])
    logger.debug(f"scene: {spec.num_points} points, {spec.num_classes} classes ({spec.layout})")
    return SyntheticScene(cloud, spec)


def gen_shapes(spec: SceneSpec, k: int = DEFAULT_K) -> List[SyntheticScene]:
    """`count` single-primitive clouds; cloud i has category i % num_classes."""
    if spec.num_points < k:
        raise InvalidArgument(f"{spec.num_points} points per shape is fewer than k={k}")
    rng = np.random.default_rng(spec.seed)
    scenes = []
    for i in range(spec.count):
        c = i % spec.num_classes
        kind = spec.primitives[c % len(spec.primitives)]
        size = (1.0 + 0.5 * (c // len(spec.primitives))) * rng.uniform(0.9, 1.1)
        pts = sample_primitive(kind, spec.num_points, size, rng) + rng.uniform(-0.1, 0.1, 3)
        cloud = PointSet(_jitter(pts, spec.noise, rng), labels=np.full(spec.num_points, c))
        scenes.append(SyntheticScene(cloud, spec, category=c))
    return scenes


def gen_part_objects(spec: SceneSpec, k: int = DEFAULT_K) -> List[SyntheticScene]:
    """
    `count` objects; object i has category c = i % num_classes and two parts, a base and
    a top sitting `spacing` * 0.6 above it, labeled 2c and 2c + 1.
    """
    _check_feasible(spec, 2, k)
    rng = np.random.default_rng(spec.seed)
    n_base = spec.num_points // 2
    n_top = spec.num_points - n_base
    scenes = []
    for i in range(spec.count):
        c = i % spec.num_classes
        base_kind = spec.primitives[c % len(spec.primitives)]
        top_kind = spec.primitives[(c + 1) % len(spec.primitives)]
        scale = rng.uniform(0.9, 1.1)
        base = sample_primitive(base_kind, n_base, scale, rng)
        top = sample_primitive(top_kind, n_top, 0.6 * scale, rng) + [0.0, 0.0, 0.6 * spec.spacing]
        pts = _jitter(np.concatenate([base, top]), spec.noise, rng)
        labels = np.concatenate([np.full(n_base, 2 * c), np.full(n_top, 2 * c + 1)])
        order = rng.permutation(spec.num_points)
        cloud = PointSet(pts[order], labels=labels[order].astype(np.int64))
        scenes.append(SyntheticScene(cloud, spec, category=c))
    return scenes
