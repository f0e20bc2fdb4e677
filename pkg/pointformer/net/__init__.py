from pointformer.net.backbone import PointTransformerNet
from pointformer.net.blocks import TransformerBlock, TransitionDown, TransitionUp
from pointformer.net.config import BackboneConfig, StageConfig
from pointformer.net.plan import GeometryPlan, plan_geometry

__all__ = [
    "BackboneConfig",
    "GeometryPlan",
    "PointTransformerNet",
    "StageConfig",
    "TransformerBlock",
    "TransitionDown",
    "TransitionUp",
    "plan_geometry",
]
