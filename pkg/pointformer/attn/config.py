from dataclasses import asdict, dataclass, replace
from typing import Any, Dict

from pointformer.util.errors import InvalidArgument

OPERATORS = ("mlp", "mlp_pool", "scalar", "vector")
POS_MODES = ("none", "absolute", "relative", "relative_attn_only", "relative_feat_only")
NORMALIZERS = ("softmax", "identity")

DEFAULT_K = 16


@dataclass(frozen=True)
class AttentionConfig:
    """
    One point transformer layer variant.

    operator: vector | scalar | mlp | mlp_pool
    pos_mode: where the position encoding enters (none, absolute, relative, or relative
        for the attention / feature branch only)
    normalize: softmax over the neighbors, or identity (raw weights)
    scaled: divide scalar attention logits by sqrt(d)
    """

    d: int
    k: int = DEFAULT_K
    operator: str = "vector"
    pos_mode: str = "relative"
    normalize: str = "softmax"
    scaled: bool = False

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InvalidArgument(f"attention width d must be >= 1, got {self.d}")
        if self.k < 1:
            raise InvalidArgument(f"neighbor count k must be >= 1, got {self.k}")
        if self.operator not in OPERATORS:
            raise InvalidArgument(f"operator must be one of {OPERATORS}, got {self.operator}")
        if self.pos_mode not in POS_MODES:
            raise InvalidArgument(f"pos_mode must be one of {POS_MODES}, got {self.pos_mode}")
        if self.normalize not in NORMALIZERS:
            raise InvalidArgument(
                f"normalize must be one of {NORMALIZERS}, got {self.normalize}"
            )

    @property
    def absolute(self) -> bool:
        return self.pos_mode == "absolute"

    @property
    def pe_attention(self) -> bool:
        """Position encoding enters the attention logits."""
        return self.pos_mode in ("absolute", "relative", "relative_attn_only")

    @property
    def pe_feature(self) -> bool:
        """Position encoding is added to the values."""
        return self.pos_mode in ("absolute", "relative", "relative_feat_only")

    @property
    def uses_neighbors(self) -> bool:
        return self.operator != "mlp"

    def with_width(self, d: int) -> "AttentionConfig":
        return replace(self, d=d)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def label(self) -> str:
        return f"{self.operator}/{self.pos_mode}/{self.normalize}"
