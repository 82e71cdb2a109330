from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import confusion_matrix

from src.errors import DimensionMismatch
from src.instances.clustering import VOID


@dataclass(eq=False)
class ConfusionAccumulator:
    """Per-class intersection / union / ground-truth pixel counts, summed over images."""
    classes: list[int]
    ignore_label: int = VOID
    intersection: dict = field(default_factory=dict)
    union: dict = field(default_factory=dict)
    pixels: dict = field(default_factory=dict)

    def __post_init__(self):
        for c in self.classes:
            self.intersection.setdefault(c, 0)
            self.union.setdefault(c, 0)
            self.pixels.setdefault(c, 0)

    def update(self, pred, gt):
        """
        Adds one image pair.

        Raises:
            DimensionMismatch: The label images differ in shape.
        """
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise DimensionMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
        keep = gt != self.ignore_label
        y_true, y_pred = gt[keep].ravel(), pred[keep].ravel()
        if y_true.size == 0:
            return self
        labels = np.union1d(np.union1d(y_true, y_pred), self.classes)
        matrix = confusion_matrix(y_true, y_pred, labels=labels)
        diag = np.diag(matrix)
        rows, cols = matrix.sum(axis=1), matrix.sum(axis=0)
        for k, c in enumerate(labels.tolist()):
            if c not in self.intersection:
                continue
            self.intersection[c] += int(diag[k])
            self.union[c] += int(rows[k] + cols[k] - diag[k])
            self.pixels[c] += int(rows[k])
        return self

    def merge(self, other):
        merged = ConfusionAccumulator(sorted(set(self.classes) | set(other.classes)), self.ignore_label)
        for acc in (self, other):
            for c in acc.classes:
                merged.intersection[c] += acc.intersection[c]
                merged.union[c] += acc.union[c]
                merged.pixels[c] += acc.pixels[c]
        return merged

    def iou(self):
        """IoU per class with a non-empty union."""
        return {c: self.intersection[c] / self.union[c] for c in self.classes if self.union[c] > 0}

    def mean_iou(self):
        per_class = self.iou()
        return float(np.mean(list(per_class.values()))) if per_class else float("nan")


def mean_iou(preds, gts, classes, ignore_label=VOID):
    """
    Mean intersection over union over a stream of label images.

    Args:
        preds (Iterable[np.ndarray]): Predicted label images.
        gts (Iterable[np.ndarray]): Ground-truth label images (same order).
        classes (list[int]): Classes to score.
        ignore_label (int): Ground-truth label that is not scored.

    Returns:
        tuple[dict[int, float], float]: IoU per class and their mean; classes
        with an empty union are left out of both.

    Raises:
        DimensionMismatch: Image shapes or stream lengths differ.
    """
    preds, gts = list(preds), list(gts)
    if len(preds) != len(gts):
        raise DimensionMismatch(f"{len(preds)} predicted vs {len(gts)} ground-truth images")
    acc = ConfusionAccumulator(list(classes), ignore_label)
    for pred, gt in zip(preds, gts):
        acc.update(pred, gt)
    return acc.iou(), acc.mean_iou()
