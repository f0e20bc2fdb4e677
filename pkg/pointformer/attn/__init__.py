from pointformer.attn.config import NORMALIZERS, OPERATORS, POS_MODES, AttentionConfig
from pointformer.attn.layer import PointTransformerLayer, PositionEncoding, position_encoding

__all__ = [
    "AttentionConfig",
    "NORMALIZERS",
    "OPERATORS",
    "POS_MODES",
    "PointTransformerLayer",
    "PositionEncoding",
    "position_encoding",
]
