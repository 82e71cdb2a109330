from dataclasses import dataclass

import numpy as np

from src.errors import EmptyGeometry
from src.rasterizer.raster import object_vertices
from src.settings import LOGGER
from src.utils import axis_scales, is_uniform_scale, orthonormalize

CONTAINMENT_TOLERANCE = 1e-5


@dataclass(frozen=True, eq=False)
class BBox3D:
    """Oriented box in the camera frame."""
    instance_id: int
    class_id: int
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray

    def corners(self):
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64)
        return self.center + (signs * self.half_extents) @ self.rotation.T

    def contains(self, points, tolerance=CONTAINMENT_TOLERANCE):
        local = (np.asarray(points, dtype=np.float64) - self.center) @ self.rotation
        return np.all(np.abs(local) <= self.half_extents + tolerance, axis=-1)

    def to_record(self):
        return {
            "instance_id": int(self.instance_id),
            "class_id": int(self.class_id),
            "center": [float(v) for v in self.center],
            "half_extents": [float(v) for v in self.half_extents],
            "rotation": [float(v) for v in self.rotation.ravel()],
        }

    @classmethod
    def from_record(cls, record):
        return cls(instance_id=int(record["instance_id"]), class_id=int(record["class_id"]),
                   center=np.asarray(record["center"], dtype=np.float64),
                   half_extents=np.asarray(record["half_extents"], dtype=np.float64),
                   rotation=np.asarray(record["rotation"], dtype=np.float64).reshape(3, 3))


def box_from_vertices(vertices, camera_from_object, instance_id, class_id):
    """
    Object-frame axis-aligned bound of `vertices`, carried into the camera frame.

    The per-axis scale of `camera_from_object` is folded into the extents and
    its rotational part becomes the box orientation.
    """
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    scales = axis_scales(camera_from_object)
    center = camera_from_object @ np.append((lo + hi) / 2.0, 1.0)
    return BBox3D(
        instance_id=instance_id,
        class_id=class_id,
        center=center[:3] / center[3],
        half_extents=(hi - lo) / 2.0 * scales,
        rotation=orthonormalize(camera_from_object[:3, :3] / scales),
    )


def bbox3d(instance, frame, seq):
    """
    Oriented 3D box of an instance in the frame's camera coordinates.

    Skinned members contribute their slice-transformed vertices for the frame's
    bones; the box is taken in the shared object frame and mapped by V·W.

    Args:
        instance (Instance): Instance from `cluster_instances`.
        frame (FrameRecord): Frame the instance belongs to.
        seq (TraceSequence): Meshes and shaders.

    Returns:
        BBox3D: Box with centre, half extents and rotation in camera space.

    Raises:
        EmptyGeometry: The member draws have no vertices.
    """
    draws = [frame.draws[d] for d in instance.members]
    vertices = [object_vertices(draw, seq) for draw in draws]
    vertices = np.concatenate(vertices) if vertices else np.zeros((0, 3))
    if not len(vertices):
        raise EmptyGeometry(f"instance {instance.instance_id} of frame {frame.frame_index} has no vertices")
    world = draws[0].world.astype(np.float64)
    if not is_uniform_scale(world):
        LOGGER.warning(f"Instance {instance.instance_id} of frame {frame.frame_index} has a non-uniform world "
                       f"scale {axis_scales(world).round(6).tolist()}; box orientation is ambiguous")
    camera_from_object = frame.view.astype(np.float64) @ world
    return box_from_vertices(vertices, camera_from_object, instance.instance_id, instance.class_id)
