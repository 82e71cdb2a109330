import numpy as np

from src.errors import DimensionMismatch, NoValidPixels
from src.settings import LOGGER

THRESHOLDS = np.arange(1, 101) * 0.05
WEIGHTS = 1.0 / THRESHOLDS
DISPLACEMENT_BINS = (0.0, 1.0, 5.0, 20.0, np.inf)


def endpoint_error(pred, gt):
    """
    Endpoint error on the pixels the ground truth marks valid.

    Raises:
        DimensionMismatch: Field sizes differ.
        NoValidPixels: The ground truth has no valid pixel.
    """
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionMismatch(f"flow {pred.width}x{pred.height} vs ground truth {gt.width}x{gt.height}")
    valid = gt.valid
    if not valid.any():
        raise NoValidPixels("ground-truth flow has no valid pixel")
    diff = pred.vectors[valid] - gt.vectors[valid]
    return np.linalg.norm(diff, axis=1), np.linalg.norm(gt.vectors[valid], axis=1)


def _wauc(epe):
    inliers = (epe[:, None] <= THRESHOLDS[None, :]).mean(axis=0)
    return float(100.0 * np.sum(WEIGHTS * inliers) / np.sum(WEIGHTS))


def wauc_flow(pred, gt):
    """
    Weighted area under the inlier-rate curve, in percent.

    Inlier rates are taken at thresholds 0.05, 0.10, ..., 5.00 px and weighted
    by the inverse threshold, so tight thresholds count most.

    Args:
        pred (FlowField): Estimated flow.
        gt (FlowField): Ground-truth flow; only its valid pixels are scored.

    Returns:
        float: Score in [0, 100].
    """
    epe, _ = endpoint_error(pred, gt)
    return _wauc(epe)


def _pooled_errors(preds, gts):
    """EPE and ground-truth magnitude over every pair; pairs without a valid pixel are skipped."""
    if len(preds) != len(gts):
        raise DimensionMismatch(f"{len(preds)} predicted pairs vs {len(gts)} ground-truth pairs")
    errors, magnitudes = [], []
    for k, (p, g) in enumerate(zip(preds, gts)):
        try:
            epe, mag = endpoint_error(p, g)
        except NoValidPixels:
            LOGGER.warning(f"flow pair {k} has no valid ground-truth pixel; skipped")
            continue
        errors.append(epe)
        magnitudes.append(mag)
    if not errors:
        raise NoValidPixels("no flow pair has a valid ground-truth pixel")
    return np.concatenate(errors), np.concatenate(magnitudes)


def wauc_many(preds, gts):
    """WAUC over the valid pixels of several pairs pooled together."""
    epe, _ = _pooled_errors(preds, gts)
    return _wauc(epe)


def wauc_by_displacement(preds, gts, bins=DISPLACEMENT_BINS):
    """WAUC per ground-truth displacement range; empty ranges are skipped."""
    epe, mag = _pooled_errors(preds, gts)
    result = {}
    for lo, hi in zip(bins[:-1], bins[1:]):
        inside = (mag >= lo) & (mag < hi)
        if inside.any():
            result[f"{lo:g}-{hi:g}px"] = _wauc(epe[inside])
    return result
