"""
Region-level average precision over instance masks.

Predictions are matched greedily in descending score order to the unmatched
ground-truth instance of the same class and image with the highest mask IoU,
provided that IoU reaches the threshold. AP is the area under the precision
envelope, summed over recall steps, then averaged over ten IoU thresholds.
"""
from dataclasses import dataclass, field

import numpy as np

from src.errors import DimensionMismatch

IOU_THRESHOLDS = np.linspace(0.5, 0.95, 10)


@dataclass(frozen=True, eq=False)
class Prediction:
    mask: np.ndarray  # (H, W) bool
    class_id: int
    score: float


@dataclass(frozen=True, eq=False)
class GroundTruthInstance:
    mask: np.ndarray
    class_id: int


@dataclass(eq=False)
class DetectionSet:
    """Per-image predictions and ground truth."""
    predictions: list = field(default_factory=list)  # per image: list[Prediction]
    ground_truth: list = field(default_factory=list)  # per image: list[GroundTruthInstance]

    def add_image(self, predictions, ground_truth):
        shapes = {m.mask.shape for m in list(predictions) + list(ground_truth)}
        if len(shapes) > 1:
            raise DimensionMismatch(f"masks of one image disagree in shape: {sorted(shapes)}")
        if any(not np.isfinite(p.score) for p in predictions):
            raise DimensionMismatch("prediction scores must be finite")
        self.predictions.append(list(predictions))
        self.ground_truth.append(list(ground_truth))
        return self

    @classmethod
    def from_label_images(cls, pred_labels, pred_classes, gt_labels, gt_classes, scores=None):
        """
        Builds a set from instance label images (0 = no instance).

        Args:
            pred_labels, gt_labels (list[np.ndarray]): Instance label images per image.
            pred_classes, gt_classes (list[dict[int, int]]): Label -> class per image.
            scores (list[dict[int, float]]): Label -> confidence; 1.0 when omitted.
        """
        dataset = cls()
        for k, (pl, pc, gl, gc) in enumerate(zip(pred_labels, pred_classes, gt_labels, gt_classes)):
            image_scores = scores[k] if scores else {}
            preds = [Prediction(pl == label, pc[label], float(image_scores.get(label, 1.0)))
                     for label in sorted(pc) if np.any(pl == label)]
            gts = [GroundTruthInstance(gl == label, gc[label]) for label in sorted(gc) if np.any(gl == label)]
            dataset.add_image(preds, gts)
        return dataset

    @property
    def classes(self):
        return sorted({g.class_id for image in self.ground_truth for g in image})


def mask_iou(a, b):
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 0.0


def average_precision(tp, n_gt):
    """Area under the precision envelope of a score-ordered hit sequence."""
    if n_gt == 0:
        return float("nan")
    if len(tp) == 0:
        return 0.0
    hits = np.cumsum(tp)
    recall = hits / n_gt
    precision = hits / np.arange(1, len(tp) + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


def _class_ap(dataset, class_id, threshold):
    ranked = [(p.score, k, i, p) for k, image in enumerate(dataset.predictions)
              for i, p in enumerate(image) if p.class_id == class_id]
    ranked.sort(key=lambda r: (-r[0], r[1], r[2]))
    gts = [[g for g in image if g.class_id == class_id] for image in dataset.ground_truth]
    taken = [np.zeros(len(image), dtype=bool) for image in gts]
    tp = []
    for _, k, _, pred in ranked:
        best, best_iou = -1, threshold
        for j, g in enumerate(gts[k]):
            if taken[k][j]:
                continue
            iou = mask_iou(pred.mask, g.mask)
            if iou >= best_iou:
                best, best_iou = j, iou
        if best >= 0:
            taken[k][best] = True
        tp.append(best >= 0)
    return average_precision(np.asarray(tp, dtype=np.float64), sum(len(g) for g in gts))


def instance_ap(dataset, thresholds=IOU_THRESHOLDS):
    """
    Average precision per class, averaged over IoU thresholds, and its mean.

    Args:
        dataset (DetectionSet): Predictions and ground truth for every image.
        thresholds (array-like): Mask-IoU thresholds.

    Returns:
        tuple[dict[int, float], float]: AP per class with at least one
        ground-truth instance, and mAP over those classes.
    """
    per_class = {c: float(np.mean([_class_ap(dataset, c, t) for t in thresholds])) for c in dataset.classes}
    mean = float(np.mean(list(per_class.values()))) if per_class else float("nan")
    return per_class, mean
