from dataclasses import dataclass

import numpy as np

from src.errors import SingularView
from src.utils import orthonormalize

DRIFT_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Pose:
    frame_index: int
    matrix: np.ndarray  # (4, 4) camera-to-world

    @property
    def rotation(self):
        return self.matrix[:3, :3]

    @property
    def translation(self):
        return self.matrix[:3, 3]

    def kitti_row(self):
        """Top three rows, row-major: the usual odometry ground-truth line."""
        return self.matrix[:3, :].ravel()


def camera_pose(frame):
    """
    Camera-to-world pose of a frame: the inverse of its view matrix.

    The rotation block is projected back onto SO(3) when float32 storage has
    left it more than 1e-9 away from orthonormal.

    Args:
        frame (FrameRecord): Frame with view matrix V.

    Returns:
        Pose: Rigid camera-to-world transform.

    Raises:
        SingularView: V is not invertible.
    """
    view = frame.view.astype(np.float64)
    if not np.all(np.isfinite(view)) or abs(np.linalg.det(view)) < 1e-12:
        raise SingularView(f"view matrix of frame {frame.frame_index} is not invertible")
    pose = np.linalg.inv(view)
    rot = pose[:3, :3]
    if np.max(np.abs(rot.T @ rot - np.eye(3))) > DRIFT_TOLERANCE:
        pose[:3, :3] = orthonormalize(rot)
    pose[3] = (0.0, 0.0, 0.0, 1.0)
    return Pose(frame.frame_index, pose)


def relative_pose(frame_f, frame_h):
    """Camera motion from f to h, expressed in f's camera frame."""
    pose_f, pose_h = camera_pose(frame_f).matrix, camera_pose(frame_h).matrix
    return np.linalg.inv(pose_f) @ pose_h
