import os

import numpy as np
from scipy.spatial.transform import Rotation

from src.errors import IoFailure


# Homogeneous transform builders
def translation(offset):
    """
    Builds a 4x4 translation matrix.

    Args:
        offset (array-like): Translation vector (x, y, z).

    Returns:
        np.ndarray: 4x4 float64 matrix.
    """
    matrix = np.eye(4)
    matrix[:3, 3] = np.asarray(offset, dtype=np.float64)
    return matrix


def rotation(axis, degrees):
    """
    Builds a 4x4 rotation matrix about one of the principal axes.

    Args:
        axis (str): One of 'x', 'y', 'z'.
        degrees (float): Rotation angle in degrees.

    Returns:
        np.ndarray: 4x4 float64 matrix.
    """
    matrix = np.eye(4)
    matrix[:3, :3] = Rotation.from_euler(axis, degrees, degrees=True).as_matrix()
    return matrix


def scaling(factor):
    """
    Builds a 4x4 scale matrix (uniform for a scalar, per-axis for a 3-vector).
    """
    matrix = np.eye(4)
    matrix[:3, :3] = np.diag(np.broadcast_to(np.asarray(factor, dtype=np.float64), (3,)))
    return matrix


def perspective(fov_y_degrees, aspect, near, far):
    """
    OpenGL-style perspective projection (camera looks down -z, NDC z in [-1, 1]).

    Args:
        fov_y_degrees (float): Vertical field of view.
        aspect (float): Width over height.
        near (float): Near plane distance.
        far (float): Far plane distance.

    Returns:
        np.ndarray: 4x4 float64 projection matrix.
    """
    focal = 1.0 / np.tan(np.radians(fov_y_degrees) / 2.0)
    matrix = np.zeros((4, 4))
    matrix[0, 0] = focal / aspect
    matrix[1, 1] = focal
    matrix[2, 2] = (far + near) / (near - far)
    matrix[2, 3] = 2.0 * far * near / (near - far)
    matrix[3, 2] = -1.0
    return matrix


def orthographic(half_width, half_height, near, far):
    """
    OpenGL-style orthographic projection of the box [-hw, hw] x [-hh, hh] x [-far, -near].
    """
    matrix = np.eye(4)
    matrix[0, 0] = 1.0 / half_width
    matrix[1, 1] = 1.0 / half_height
    matrix[2, 2] = -2.0 / (far - near)
    matrix[2, 3] = -(far + near) / (far - near)
    return matrix


def look_at(eye, target, up=(0.0, 1.0, 0.0)):
    """
    Returns the camera-to-world transform of a camera at `eye` looking at `target`.

    Args:
        eye (array-like): Camera position in world space.
        target (array-like): Point the camera looks at.
        up (array-like): Approximate up direction.

    Returns:
        np.ndarray: 4x4 rigid camera-to-world matrix (camera looks down its -z axis).
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    right /= np.linalg.norm(right)
    true_up = np.cross(right, forward)
    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = true_up
    pose[:3, 2] = -forward
    pose[:3, 3] = eye
    return pose


def rigid_inverse(transform):
    """
    Inverts a rigid 4x4 transform without a general matrix inverse.
    """
    inverse = np.eye(4)
    rot = transform[:3, :3]
    inverse[:3, :3] = rot.T
    inverse[:3, 3] = -rot.T @ transform[:3, 3]
    return inverse


def orthonormalize(rot):
    """
    Projects a 3x3 matrix onto the nearest rotation (SVD polar factor).
    """
    u, _, vt = np.linalg.svd(rot)
    result = u @ vt
    if np.linalg.det(result) < 0:
        u[:, -1] = -u[:, -1]
        result = u @ vt
    return result


def axis_scales(world):
    """
    Column norms of the upper-left 3x3 block, i.e. the per-axis scale of W.
    """
    return np.linalg.norm(np.asarray(world, dtype=np.float64)[:3, :3], axis=0)


def is_uniform_scale(world, tolerance=1e-5):
    """
    Tells whether W's linear part is a rotation times a uniform scale.
    """
    block = np.asarray(world, dtype=np.float64)[:3, :3]
    scales = axis_scales(world)
    if scales.max() - scales.min() > tolerance * max(scales.max(), 1.0):
        return False
    gram = block.T @ block
    return bool(np.allclose(gram, np.eye(3) * scales.mean() ** 2, atol=tolerance * max(scales.mean() ** 2, 1.0)))


def homogeneous(points):
    """
    Appends w = 1 to an (N, 3) array of points.
    """
    points = np.asarray(points, dtype=np.float64)
    return np.concatenate([points, np.ones(points.shape[:-1] + (1,))], axis=-1)


def ensure_dir(path):
    """
    Creates a directory (and parents) if needed and returns its path.

    Raises:
        IoFailure: The directory cannot be created.
    """
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create directory {path}: {exc}") from exc
    return path
