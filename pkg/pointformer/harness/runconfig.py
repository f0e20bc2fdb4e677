"""
Typed, validated view of a loaded configuration.

`RunConfig.from_config` converts every field and runs the component validators before any
work starts; a bad value raises ConfigError naming the dotted field.
"""

from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple, TypeVar

import numpy as np

from pointformer.attn.config import NORMALIZERS, OPERATORS, POS_MODES, AttentionConfig
from pointformer.harness.scenes import SceneSpec
from pointformer.net.config import BackboneConfig
from pointformer.util.conf import PointformerConfig
from pointformer.util.errors import ConfigError, InvalidArgument

T = TypeVar("T")

DATA_KINDS = ("scene", "shapes", "parts")
DTYPES = ("float32", "float64")
EXPERIMENTS = ("operator", "pos_mode", "normalize", "k")


@dataclass(frozen=True)
class OptimSpec:
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    milestones: Tuple[float, ...] = (0.6, 0.8)
    gamma: float = 0.1


@dataclass(frozen=True)
class DataSpec:
    kind: str
    scene: SceneSpec


@dataclass(frozen=True)
class AblateSpec:
    experiments: Tuple[str, ...] = EXPERIMENTS
    operators: Tuple[str, ...] = OPERATORS
    pos_modes: Tuple[str, ...] = POS_MODES
    normalizers: Tuple[str, ...] = NORMALIZERS
    ks: Tuple[int, ...] = (4, 8, 16, 32, 64)
    seeds: Tuple[int, ...] = (0,)


@dataclass(frozen=True)
class RunConfig:
    seed: int
    iterations: int
    out_dir: str
    log_every: int
    fps_start: int
    dtype: str
    backbone: BackboneConfig
    optim: OptimSpec
    data: DataSpec
    ablate: AblateSpec

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def with_seed(self, seed: int) -> "RunConfig":
        """Same run with another seed; the data seed follows unless it was set explicitly."""
        scene = self.data.scene
        if scene.seed == self.seed:
            scene = replace(scene, seed=seed)
        return replace(self, seed=seed, data=replace(self.data, scene=scene))

    def with_attention(self, **changes) -> "RunConfig":
        backbone = self.backbone
        k = changes.pop("k", backbone.k)
        attention = replace(backbone.attention, k=k, **changes)
        return replace(self, backbone=replace(backbone, k=k, attention=attention))

    @classmethod
    def from_config(
        cls, cfg: PointformerConfig, seed: Optional[int] = None, out_dir: str = ""
    ) -> "RunConfig":
        run_seed = cfg.get_int("run", "seed", 0) if seed is None else seed
        iterations = cfg.get_int("run", "iterations", 2000)
        if iterations < 0:
            raise ConfigError("run.iterations", f"must be >= 0, got {iterations}")
        log_every = cfg.get_int("run", "log_every", 1)
        if log_every < 1:
            raise ConfigError("run.log_every", f"must be >= 1, got {log_every}")
        dtype = cfg.get_variable("run", "dtype", "float32")
        if dtype not in DTYPES:
            raise ConfigError("run.dtype", f"must be one of {DTYPES}, got {dtype}")
        fps_start = cfg.get_int("run", "fps_start", 0)
        if fps_start < 0:
            raise ConfigError("run.fps_start", f"must be >= 0, got {fps_start}")

        attention = _validated(
            "attention",
            lambda: AttentionConfig(
                d=1,
                k=cfg.get_int("model", "k", 16),
                operator=cfg.get_variable("attention", "operator", "vector"),
                pos_mode=cfg.get_variable("attention", "pos_mode", "relative"),
                normalize=cfg.get_variable("attention", "normalize", "softmax"),
                scaled=cfg.get_boolean_config("attention", "scaled", False),
            ),
        )
        backbone = _validated(
            "model",
            lambda: BackboneConfig.from_lists(
                widths=_ints(cfg, "model", "widths"),
                blocks=_ints(cfg, "model", "blocks"),
                downsample=_ints(cfg, "model", "downsample"),
                k=cfg.get_int("model", "k", 16),
                attention=attention,
                head=cfg.get_variable("model", "head", "segmentation"),
                num_classes=cfg.get_int("model", "num_classes", 3),
                in_channels=cfg.get_int("model", "in_channels", 3),
                bottleneck=cfg.get_int("model", "bottleneck", 1),
                zero_init_residual=cfg.get_boolean_config("model", "zero_init_residual", False),
            ),
        )

        optim = OptimSpec(
            lr=cfg.get_float("optim", "lr", 0.05),
            momentum=cfg.get_float("optim", "momentum", 0.9),
            weight_decay=cfg.get_float("optim", "weight_decay", 1e-4),
            milestones=tuple(_floats(cfg, "optim", "milestones")),
            gamma=cfg.get_float("optim", "gamma", 0.1),
        )
        if optim.lr < 0:
            raise ConfigError("optim.lr", f"must be >= 0, got {optim.lr}")
        if not 0 <= optim.momentum < 1:
            raise ConfigError("optim.momentum", f"must be in [0, 1), got {optim.momentum}")
        if optim.weight_decay < 0:
            raise ConfigError("optim.weight_decay", f"must be >= 0, got {optim.weight_decay}")
        if any(not 0 <= m <= 1 for m in optim.milestones):
            raise ConfigError("optim.milestones", "fractions must lie in [0, 1]")

        data = _data_spec(cfg, run_seed)
        expected = data.scene.num_classes * (2 if data.kind == "parts" else 1)
        if backbone.num_classes != expected:
            raise ConfigError(
                "model.num_classes",
                f"{data.kind} data with {data.scene.num_classes} classes needs {expected} "
                f"output classes, got {backbone.num_classes}",
            )
        wanted_head = "classification" if data.kind == "shapes" else "segmentation"
        if backbone.head != wanted_head:
            raise ConfigError("model.head", f"{data.kind} data needs a {wanted_head} head")

        return cls(
            seed=run_seed,
            iterations=iterations,
            out_dir=out_dir or cfg.get_variable("run", "out_dir", "runs/default"),
            log_every=log_every,
            fps_start=fps_start,
            dtype=dtype,
            backbone=backbone,
            optim=optim,
            data=data,
            ablate=_ablate_spec(cfg),
        )


def _validated(section: str, build: Callable[[], T]) -> T:
    try:
        return build()
    except InvalidArgument as e:
        raise ConfigError(section, str(e)) from e


def _ints(cfg: PointformerConfig, section: str, key: str) -> List[int]:
    try:
        return [int(v) for v in cfg.get_list(section, key)]
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}", "expected comma-separated integers") from exc


def _floats(cfg: PointformerConfig, section: str, key: str) -> List[float]:
    try:
        return [float(v) for v in cfg.get_list(section, key)]
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}", "expected comma-separated numbers") from exc


def _data_spec(cfg: PointformerConfig, run_seed: int) -> DataSpec:
    kind = cfg.get_variable("data", "kind", "scene")
    if kind not in DATA_KINDS:
        raise ConfigError("data.kind", f"must be one of {DATA_KINDS}, got {kind}")
    scene = _validated(
        "data",
        lambda: SceneSpec(
            num_points=cfg.get_int("data", "num_points", 512),
            num_classes=cfg.get_int("data", "num_classes", 3),
            noise=cfg.get_float("data", "noise", 0.01),
            seed=cfg.get_int("data", "seed", run_seed),
            layout=cfg.get_variable("data", "layout", "stacked"),
            primitives=tuple(cfg.get_list("data", "primitives", "plane,sphere,box")),
            spacing=cfg.get_float("data", "spacing", 1.0),
            count=cfg.get_int("data", "count", 1),
        ),
    )
    return DataSpec(kind, scene)


def _ablate_spec(cfg: PointformerConfig) -> AblateSpec:
    spec = AblateSpec(
        experiments=tuple(cfg.get_list("ablate", "experiments", ",".join(EXPERIMENTS))),
        operators=tuple(cfg.get_list("ablate", "operators", ",".join(OPERATORS))),
        pos_modes=tuple(cfg.get_list("ablate", "pos_modes", ",".join(POS_MODES))),
        normalizers=tuple(cfg.get_list("ablate", "normalizers", ",".join(NORMALIZERS))),
        ks=tuple(_ints(cfg, "ablate", "ks")) or (4, 8, 16, 32, 64),
        seeds=tuple(_ints(cfg, "ablate", "seeds")) or (0,),
    )
    checks = (
        ("experiments", spec.experiments, EXPERIMENTS),
        ("operators", spec.operators, OPERATORS),
        ("pos_modes", spec.pos_modes, POS_MODES),
        ("normalizers", spec.normalizers, NORMALIZERS),
    )
    for key, values, allowed in checks:
        bad = [v for v in values if v not in allowed]
        if bad:
            raise ConfigError(f"ablate.{key}", f"unknown value(s) {bad}; choose from {allowed}")
    if any(k < 1 for k in spec.ks):
        raise ConfigError("ablate.ks", "neighbor counts must be >= 1")
    return spec
