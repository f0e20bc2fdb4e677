"""
Training and evaluation at desk scale: one cloud per optimization step, unweighted
cross-entropy, SGD with momentum and a step schedule.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from pointformer.harness.loss import cross_entropy
from pointformer.harness.metrics import (
    MetricsReport,
    confusion_matrix,
    part_miou,
    report_from_confusion,
)
from pointformer.harness.runconfig import RunConfig
from pointformer.harness.scenes import SyntheticScene, gen_part_objects, gen_scene, gen_shapes
from pointformer.net.backbone import PointTransformerNet
from pointformer.net.plan import GeometryPlan
from pointformer.nn.optim import OptimizerState, sgd_step, step_schedule
from pointformer.util.errors import InvalidInput, TrainingDiverged

logger = logging.getLogger(__name__)


@dataclass
class LossRecord:
    iteration: int
    lr: float
    loss: float


@dataclass
class TrainResult:
    model: PointTransformerNet
    losses: List[LossRecord] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1].loss if self.losses else float("nan")


def build_model(run: RunConfig) -> PointTransformerNet:
    return PointTransformerNet(run.backbone, seed=run.seed, dtype=run.np_dtype)


def make_scenes(run: RunConfig, seed: Optional[int] = None) -> List[SyntheticScene]:
    """Scenes of the configured kind; `seed` replaces the data seed (held-out data)."""
    spec = run.data.scene
    if seed is not None:
        spec = replace(spec, seed=seed)
    k = run.backbone.k
    if run.data.kind == "shapes":
        return gen_shapes(spec, k)
    if run.data.kind == "parts":
        return gen_part_objects(spec, k)
    return [gen_scene(spec, k)]


def _target(model: PointTransformerNet, scene: SyntheticScene) -> np.ndarray:
    if model.cfg.head == "classification":
        if scene.category is None:
            raise InvalidInput("classification needs scenes with a category")
        return np.array([scene.category])
    return scene.labels


def _plans(model: PointTransformerNet, scenes: Sequence[SyntheticScene], start: int):
    return [model.plan(s.cloud, start % len(s.cloud)) for s in scenes]


def train(
    run: RunConfig,
    scenes: Sequence[SyntheticScene],
    model: Optional[PointTransformerNet] = None,
    on_record: Optional[Callable[[LossRecord], None]] = None,
) -> TrainResult:
    """
    Run `run.iterations` forward/backward/SGD steps, cycling through the scenes.
    Raises TrainingDiverged when the loss stops being finite.
    """
    if not scenes:
        raise InvalidInput("training needs at least one scene")
    model = model or build_model(run)
    model.train()
    plans = _plans(model, scenes, run.fps_start)
    inputs = [model.input_features(s.cloud) for s in scenes]
    targets = [_target(model, s) for s in scenes]
    params = model.parameters()
    state = OptimizerState(
        learning_rate=run.optim.lr,
        momentum=run.optim.momentum,
        weight_decay=run.optim.weight_decay,
        schedule=step_schedule(run.iterations, run.optim.milestones, run.optim.gamma),
    )
    result = TrainResult(model)
    logger.info(
        f"training {run.backbone.head} network ({params.total_size()} weights) for "
        f"{run.iterations} iterations on {len(scenes)} cloud(s)"
    )
    for it in range(run.iterations):
        i = it % len(scenes)
        logits = model.forward(inputs[i], plans[i])
        loss, dlogits = cross_entropy(logits, targets[i])
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"loss became {loss} at iteration {it} (lr {state.current_lr():.5g})"
            )
        record = LossRecord(it, state.current_lr(), loss)
        result.losses.append(record)
        if on_record:
            on_record(record)
        if it % run.log_every == 0:
            logger.info(f"iter {it:>6}  lr {record.lr:.5g}  loss {loss:.6f}")
        model.backward(dlogits)
        sgd_step(params, state)
    return result


def predict(
    model: PointTransformerNet, scene: SyntheticScene, plan: Optional[GeometryPlan] = None
) -> np.ndarray:
    """Predicted labels: one per point (segmentation) or a single category."""
    model.eval()
    x = model.input_features(scene.cloud)
    logits = model.forward(x, plan or model.plan(scene.cloud))
    return logits.argmax(axis=1)


def evaluate(
    model: PointTransformerNet, scenes: Sequence[SyntheticScene], start: int = 0
) -> MetricsReport:
    """
    Confusion-matrix metrics over all scenes. Part objects additionally report instance
    and category mIoU over their categories' part labels.
    """
    if not scenes:
        raise InvalidInput("evaluation needs at least one scene")
    c = model.cfg.num_classes
    conf = np.zeros((c, c), dtype=np.int64)
    objects = []
    for scene, plan in zip(scenes, _plans(model, scenes, start)):
        pred = predict(model, scene, plan)
        truth = _target(model, scene)
        conf += confusion_matrix(pred, truth, c)
        if model.cfg.head == "segmentation" and scene.category is not None:
            objects.append((scene.category, pred, truth))
    report = report_from_confusion(conf)
    if objects:
        parts: Dict[int, List[int]] = {cat: [2 * cat, 2 * cat + 1] for cat, _, _ in objects}
        report.cat_miou, report.ins_miou = part_miou(objects, parts)
    model.train()
    return report
