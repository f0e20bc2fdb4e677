from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from pointformer.attn.config import DEFAULT_K, AttentionConfig
from pointformer.util.errors import InvalidArgument

HEADS = ("segmentation", "classification")
DOWNSAMPLE_RATES = (1, 4)

DEFAULT_WIDTHS = (32, 64, 128, 256, 512)
DESK_WIDTHS = (8, 16, 32, 64, 128)
DEFAULT_DOWNSAMPLE = (1, 4, 4, 4, 4)


@dataclass(frozen=True)
class StageConfig:
    width: int
    blocks: int = 1
    downsample: int = 1

    def __post_init__(self) -> None:
        if self.width < 1:
            raise InvalidArgument(f"stage width must be >= 1, got {self.width}")
        if self.blocks < 0:
            raise InvalidArgument(f"stage block count must be >= 0, got {self.blocks}")
        if self.downsample not in DOWNSAMPLE_RATES:
            raise InvalidArgument(
                f"downsample rate must be one of {DOWNSAMPLE_RATES}, got {self.downsample}"
            )


@dataclass(frozen=True)
class BackboneConfig:
    """
    Stage schedule, neighbor count, attention variant and output head of a network.

    The attention template's width is replaced per stage; its k is replaced by `k`.
    """

    stages: Tuple[StageConfig, ...]
    k: int = DEFAULT_K
    attention: AttentionConfig = field(default_factory=lambda: AttentionConfig(d=1))
    head: str = "segmentation"
    num_classes: int = 3
    in_channels: int = 3
    bottleneck: int = 1
    zero_init_residual: bool = False

    def __post_init__(self) -> None:
        if not self.stages:
            raise InvalidArgument("a backbone needs at least one stage")
        if self.stages[0].downsample != 1:
            raise InvalidArgument("the first stage must have downsample rate 1")
        if self.k < 1:
            raise InvalidArgument(f"k must be >= 1, got {self.k}")
        if self.head not in HEADS:
            raise InvalidArgument(f"head must be one of {HEADS}, got {self.head}")
        if self.num_classes < 2:
            raise InvalidArgument(f"num_classes must be >= 2, got {self.num_classes}")
        if self.in_channels < 1:
            raise InvalidArgument(f"in_channels must be >= 1, got {self.in_channels}")
        if self.bottleneck < 1:
            raise InvalidArgument(f"bottleneck ratio must be >= 1, got {self.bottleneck}")

    @classmethod
    def from_lists(
        cls,
        widths: Sequence[int] = DEFAULT_WIDTHS,
        blocks: Sequence[int] = (1,),
        downsample: Sequence[int] = DEFAULT_DOWNSAMPLE,
        **kwargs: Any,
    ) -> "BackboneConfig":
        """Build from per-stage lists; a single-entry `blocks` applies to every stage."""
        widths = list(widths)
        blocks = list(blocks) * len(widths) if len(blocks) == 1 else list(blocks)
        if not len(widths) == len(blocks) == len(downsample):
            raise InvalidArgument(
                f"widths ({len(widths)}), blocks ({len(blocks)}) and downsample "
                f"({len(downsample)}) must have one entry per stage"
            )
        stages = tuple(StageConfig(w, b, r) for w, b, r in zip(widths, blocks, downsample))
        return cls(stages=stages, **kwargs)

    @property
    def widths(self) -> List[int]:
        return [s.width for s in self.stages]

    def stage_attention(self, width: int) -> AttentionConfig:
        return replace(self.attention, d=self.inner_width(width), k=self.k)

    def inner_width(self, width: int) -> int:
        return max(1, width // self.bottleneck)

    def cardinalities(self, n: int) -> List[int]:
        """Points kept by each stage: every rate-r stage keeps ceil(n_prev / r), at least 1."""
        out = []
        for stage in self.stages:
            n = max(1, -(-n // stage.downsample))
            out.append(n)
        return out

    @property
    def min_points(self) -> int:
        """Smallest N for which every stage but the last still keeps one point per pooling."""
        return int(np.prod([s.downsample for s in self.stages[:-1]]))

    def to_dict(self) -> Dict[str, Any]:
        """Architecture record stored in checkpoints (JSON types only)."""
        return {
            "widths": [s.width for s in self.stages],
            "blocks": [s.blocks for s in self.stages],
            "downsample": [s.downsample for s in self.stages],
            "k": self.k,
            "head": self.head,
            "num_classes": self.num_classes,
            "in_channels": self.in_channels,
            "bottleneck": self.bottleneck,
            "operator": self.attention.operator,
            "pos_mode": self.attention.pos_mode,
            "normalize": self.attention.normalize,
            "scaled": self.attention.scaled,
        }
