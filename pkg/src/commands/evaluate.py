import argparse
from pathlib import Path

import numpy as np
import pandas as pd

from src.commands import run_command
from src.commands.exports import flow_pairs, frame_indices, read_frame_labels, read_pair_flow, read_poses
from src.errors import DimensionMismatch, InputError, IoFailure
from src.instances.clustering import VOID
from src.metrics.detection import DetectionSet, instance_ap
from src.metrics.flow import wauc_by_displacement, wauc_many
from src.metrics.odometry import TrajectoryPair, rotation_error, translation_error
from src.metrics.segmentation import mean_iou
from src.settings import LOGGER, settings

TASKS = ("seg", "inst", "flow", "odom")
SEGMENT_FRACTIONS = (0.25, 0.5, 0.75, 1.0)


def _frames(pred, gt):
    indices = frame_indices(gt)
    missing = sorted(set(indices) - set(frame_indices(pred)))
    if missing:
        raise InputError(f"{pred}: frames {missing} missing from prediction")
    return indices


def evaluate_segmentation(pred, gt):
    preds, gts = [], []
    for k in _frames(pred, gt):
        preds.append(read_frame_labels(pred, k)[1])
        gts.append(read_frame_labels(gt, k)[1])
    classes = sorted(set(np.unique(np.concatenate([g.ravel() for g in gts])).tolist()) - {VOID})
    per_class, mean = mean_iou(preds, gts, classes)
    table = pd.DataFrame({"class_id": list(per_class), "iou": list(per_class.values())})
    return {"miou": mean}, table


def _instance_classes(labels, semantic):
    return {int(label): int(np.bincount(semantic[labels == label]).argmax())
            for label in np.unique(labels) if label != 0}


def evaluate_instances(pred, gt):
    pred_labels, pred_classes, gt_labels, gt_classes = [], [], [], []
    for k in _frames(pred, gt):
        for labels_out, classes_out, root in ((pred_labels, pred_classes, pred), (gt_labels, gt_classes, gt)):
            labels, semantic = read_frame_labels(root, k)
            labels_out.append(labels)
            classes_out.append(_instance_classes(labels, semantic))
    dataset = DetectionSet.from_label_images(pred_labels, pred_classes, gt_labels, gt_classes)
    per_class, mean = instance_ap(dataset)
    table = pd.DataFrame({"class_id": list(per_class), "ap": list(per_class.values())})
    return {"map": mean}, table


def evaluate_flow(pred, gt):
    pairs = flow_pairs(gt)
    if not pairs:
        raise InputError(f"{gt}: no flow files")
    preds, gts = [], []
    for f, g in pairs:
        gts.append(read_pair_flow(gt, f, g))
        preds.append(read_pair_flow(pred, f, g))
    bins = wauc_by_displacement(preds, gts)
    table = pd.DataFrame({"displacement": list(bins), "wauc": list(bins.values())})
    return {"wauc": wauc_many(preds, gts)}, table


def evaluate_odometry(pred, gt, lengths=None):
    traj = TrajectoryPair(read_poses(pred), read_poses(gt))
    if lengths is None:
        total = float(traj.path_lengths[-1])
        lengths = tuple(total * s for s in SEGMENT_FRACTIONS) if total > 0 else (1.0,)
    rot_per_length, rot = rotation_error(traj, lengths)
    trans_per_length, trans = translation_error(traj, lengths)
    table = pd.DataFrame({"length": list(rot_per_length), "rotation_deg_per_unit": list(rot_per_length.values()),
                          "translation_per_unit": [trans_per_length[k] for k in rot_per_length]})
    return {"rotation_error": rot, "translation_error": trans}, table


EVALUATORS = {
    "seg": evaluate_segmentation,
    "inst": evaluate_instances,
    "flow": evaluate_flow,
    "odom": evaluate_odometry,
}


def write_results(path, task, summary, table):
    """Key/value results file: `task.key value` per line, table rows as `task.<column>.<row>`."""
    lines = [f"{task}.{key} {value:.9g}" for key, value in sorted(summary.items())]
    first = table.columns[0]
    for row in table.to_dict("records"):
        for column in table.columns[1:]:
            lines.append(f"{task}.{column}.{row[first]} {row[column]:.9g}")
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _track(task, summary):
    settings.MLFLOW.start_run(run_name=f"evaluate-{task}")
    try:
        settings.MLFLOW.set_tag("task", task)
        settings.MLFLOW.log_metrics({k: float(v) for k, v in summary.items() if np.isfinite(v)})
    finally:
        settings.MLFLOW.end_run()


def cmd_evaluate(task, pred, gt, results=None):
    """
    Scores a prediction directory against a ground-truth directory.

    Args:
        task (str): One of 'seg', 'inst', 'flow', 'odom'.
        pred (str | Path): Directory in the derive output layout.
        gt (str | Path): Ground-truth directory in the same layout.
        results (str | Path): Key/value results file (default: <pred>/results_<task>.txt).

    Returns:
        dict: Summary scalars.

    Raises:
        InputError: Missing or malformed files (the file is named in the message).
    """
    pred, gt = Path(pred), Path(gt)
    for root in (pred, gt):
        if not root.is_dir():
            raise InputError(f"{root}: not a directory")
    if task not in EVALUATORS:
        raise InputError(f"unknown task {task!r}")
    try:
        summary, table = EVALUATORS[task](pred, gt)
    except DimensionMismatch as exc:
        raise DimensionMismatch(f"{pred} vs {gt}: {exc}") from exc
    print(f"[{task}] " + "  ".join(f"{k}={v:.6f}" for k, v in summary.items()))
    if len(table):
        print(table.to_string(index=False))
    write_results(results or pred / f"results_{task}.txt", task, summary, table)
    if settings.TRACK_METRICS:
        _track(task, summary)
    LOGGER.info(f"Evaluated {task}: {summary}")
    return summary


def add_arguments(parser):
    parser.add_argument("--task", choices=TASKS, required=True, help="Metric family")
    parser.add_argument("--pred", type=str, required=True, help="Prediction directory")
    parser.add_argument("--gt", type=str, required=True, help="Ground-truth directory")
    parser.add_argument("--results", type=str, default=None, help="Key/value results file")


def run(args):
    return run_command(cmd_evaluate, args.task, args.pred, args.gt, results=args.results)


def main(argv=None):
    parser = argparse.ArgumentParser(description="Evaluate predictions against ground truth")
    add_arguments(parser)
    return run(parser.parse_args(argv))


if __name__ == "__main__":
    raise SystemExit(main())
