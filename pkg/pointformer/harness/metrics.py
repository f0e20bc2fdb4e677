"""
Segmentation metrics from a confusion matrix.

IoU_c = TP_c / (TP_c + FP_c + FN_c). A class with an empty union (absent from both truth
and prediction) has no IoU and is left out of the mIoU mean; mAcc averages the accuracy
of the classes present in the truth.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from pointformer.util.errors import InvalidInput


def confusion_matrix(pred: np.ndarray, truth: np.ndarray, num_classes: int) -> np.ndarray:
    """(C, C) counts, rows = truth, columns = prediction."""
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if pred.shape != truth.shape:
        raise InvalidInput(f"prediction {pred.shape} and truth {truth.shape} differ in length")
    for name, v in (("prediction", pred), ("truth", truth)):
        if v.size and (v.min() < 0 or v.max() >= num_classes):
            raise InvalidInput(f"{name} labels must be in [0, {num_classes})")
    index = num_classes * truth.astype(np.int64) + pred.astype(np.int64)
    return np.bincount(index, minlength=num_classes**2).reshape(num_classes, num_classes)


@dataclass
class MetricsReport:
    oa: float
    macc: float
    miou: float
    per_class_iou: List[float]
    per_class_acc: List[float]
    confusion: np.ndarray
    support: List[int] = field(default_factory=list)
    ins_miou: Optional[float] = None
    cat_miou: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "oa": self.oa,
            "macc": self.macc,
            "miou": self.miou,
            "per_class_iou": [_json_float(v) for v in self.per_class_iou],
            "per_class_acc": [_json_float(v) for v in self.per_class_acc],
            "confusion": self.confusion.tolist(),
        }
        if self.ins_miou is not None:
            out["ins_miou"] = self.ins_miou
            out["cat_miou"] = self.cat_miou
        return out

    def class_rows(self) -> List[Tuple[int, Any, Any, int]]:
        """(class, iou, acc, support) rows; empty cells for undefined values."""
        return [
            (c, _csv_float(iou), _csv_float(acc), sup)
            for c, (iou, acc, sup) in enumerate(
                zip(self.per_class_iou, self.per_class_acc, self.support)
            )
        ]


def _json_float(v: float) -> Optional[float]:
    return None if np.isnan(v) else float(v)


def _csv_float(v: float) -> str:
    return "" if np.isnan(v) else f"{v:.6f}"


def report_from_confusion(conf: np.ndarray) -> MetricsReport:
    conf = np.asarray(conf, dtype=np.int64)
    total = conf.sum()
    tp = np.diag(conf).astype(np.float64)
    support = conf.sum(axis=1)
    predicted = conf.sum(axis=0)
    union = support + predicted - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, tp / union, np.nan)
        acc = np.where(support > 0, tp / support, np.nan)
    oa = float(tp.sum() / total) if total else 0.0
    return MetricsReport(
        oa=oa,
        macc=float(np.nanmean(acc)) if np.any(support > 0) else 0.0,
        miou=float(np.nanmean(iou)) if np.any(union > 0) else 0.0,
        per_class_iou=iou.tolist(),
        per_class_acc=acc.tolist(),
        confusion=conf,
        support=support.tolist(),
    )


def segmentation_report(pred: np.ndarray, truth: np.ndarray, num_classes: int) -> MetricsReport:
    return report_from_confusion(confusion_matrix(pred, truth, num_classes))


def part_miou(
    objects: Sequence[Tuple[int, np.ndarray, np.ndarray]],
    parts_per_category: Mapping[int, Sequence[int]],
) -> Tuple[float, float]:
    """
    (category mIoU, instance mIoU) over (category, predicted parts, true parts) objects.

    An object's score is the mean IoU over its category's parts, skipping parts absent
    from both its prediction and its truth. Instance mIoU averages over objects, category
    mIoU averages the per-category object means.
    """
    if not objects:
        raise InvalidInput("part_miou needs at least one object")
    by_category: Dict[int, List[float]] = {}
    scores = []
    for category, pred, truth in objects:
        if category not in parts_per_category:
            raise InvalidInput(f"unknown category {category}")
        pred, truth = np.asarray(pred), np.asarray(truth)
        ious = []
        for part in parts_per_category[category]:
            p, t = pred == part, truth == part
            union = np.count_nonzero(p | t)
            if union:
                ious.append(np.count_nonzero(p & t) / union)
        score = float(np.mean(ious)) if ious else 1.0
        scores.append(score)
        by_category.setdefault(category, []).append(score)
    cat = float(np.mean([np.mean(v) for v in by_category.values()]))
    return cat, float(np.mean(scores))
