"""
Odometry error over trajectory segments of fixed path length.

For every start frame and segment length L the segment ends at the first frame
whose cumulative ground-truth path length reaches start + L. The error pose
is (gt_rel)⁻¹ · pred_rel; its rotation angle and translation norm are divided
by L.
"""
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from src.errors import DimensionMismatch, TrajectoryTooShort

DEFAULT_LENGTHS = (1.0, 2.0, 3.0, 4.0)
LENGTH_TOLERANCE = 1e-9


@dataclass(eq=False)
class TrajectoryPair:
    predicted: list  # (4, 4) camera-to-world per frame
    ground_truth: list

    def __post_init__(self):
        self.predicted = [np.asarray(p, dtype=np.float64) for p in self.predicted]
        self.ground_truth = [np.asarray(p, dtype=np.float64) for p in self.ground_truth]
        if len(self.predicted) != len(self.ground_truth):
            raise DimensionMismatch(f"{len(self.predicted)} predicted vs {len(self.ground_truth)} ground-truth poses")
        if len(self.ground_truth) < 2:
            raise TrajectoryTooShort("a trajectory needs at least two poses")

    @property
    def path_lengths(self):
        """Cumulative ground-truth path length at every frame."""
        centres = np.array([p[:3, 3] for p in self.ground_truth])
        steps = np.linalg.norm(np.diff(centres, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])


def rotation_angle(matrix):
    """Rotation angle of a pose's rotation block, in degrees."""
    return float(np.degrees(Rotation.from_matrix(matrix[:3, :3]).magnitude()))


def segment_errors(traj, lengths=DEFAULT_LENGTHS):
    """
    Per-segment errors.

    Returns:
        pd.DataFrame: One row per (start frame, length) with rotation error
        (deg per unit), translation error (units per unit), frames spanned and
        speed (units per frame).

    Raises:
        TrajectoryTooShort: The ground-truth path is shorter than the longest segment.
    """
    dist = traj.path_lengths
    if dist[-1] + LENGTH_TOLERANCE < max(lengths):
        raise TrajectoryTooShort(f"path length {dist[-1]:.6g} is shorter than segment length {max(lengths):g}")
    rows = []
    for first in range(len(dist)):
        for length in lengths:
            reached = np.nonzero(dist >= dist[first] + length - LENGTH_TOLERANCE)[0]
            if not len(reached):
                continue
            last = int(reached[0])
            gt_rel = np.linalg.inv(traj.ground_truth[first]) @ traj.ground_truth[last]
            pred_rel = np.linalg.inv(traj.predicted[first]) @ traj.predicted[last]
            error = np.linalg.inv(gt_rel) @ pred_rel
            rows.append({
                "first_frame": first,
                "length": length,
                "rotation_error": rotation_angle(error) / length,
                "translation_error": float(np.linalg.norm(error[:3, 3])) / length,
                "frames": last - first,
                "speed": length / (last - first),
            })
    return pd.DataFrame(rows, columns=["first_frame", "length", "rotation_error", "translation_error",
                                       "frames", "speed"])


def rotation_error(traj, lengths=DEFAULT_LENGTHS):
    """
    Rotation error in degrees per unit of path length.

    Args:
        traj (TrajectoryPair): Predicted and ground-truth poses.
        lengths (Sequence[float]): Segment lengths in world units.

    Returns:
        tuple[dict[float, float], float]: Mean error per segment length and over all segments.
    """
    errors = segment_errors(traj, lengths)
    per_length = errors.groupby("length")["rotation_error"].mean().to_dict()
    return per_length, float(errors["rotation_error"].mean())


def translation_error(traj, lengths=DEFAULT_LENGTHS):
    """Translation error in units per unit of path length, shaped like `rotation_error`."""
    errors = segment_errors(traj, lengths)
    per_length = errors.groupby("length")["translation_error"].mean().to_dict()
    return per_length, float(errors["translation_error"].mean())


def errors_by_speed(traj, lengths=DEFAULT_LENGTHS, bins=4):
    """Mean segment errors binned by speed (units per frame)."""
    errors = segment_errors(traj, lengths)
    errors["speed_bin"] = pd.cut(errors["speed"], bins=bins)
    return errors.groupby("speed_bin", observed=True)[["rotation_error", "translation_error"]].mean()
