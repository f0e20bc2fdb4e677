from pointformer.harness.loss import CrossEntropy, cross_entropy
from pointformer.harness.metrics import (
    MetricsReport,
    confusion_matrix,
    part_miou,
    report_from_confusion,
)
from pointformer.harness.runconfig import RunConfig
from pointformer.harness.scenes import (
    SceneSpec,
    SyntheticScene,
    gen_part_objects,
    gen_scene,
    gen_shapes,
)
from pointformer.harness.trainer import LossRecord, TrainResult, evaluate, train

__all__ = [
    "CrossEntropy",
    "LossRecord",
    "MetricsReport",
    "RunConfig",
    "SceneSpec",
    "SyntheticScene",
    "TrainResult",
    "confusion_matrix",
    "cross_entropy",
    "evaluate",
    "gen_part_objects",
    "gen_scene",
    "gen_shapes",
    "part_miou",
    "report_from_confusion",
    "train",
]
