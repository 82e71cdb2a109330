"""
Flow files: Middlebury `.flo` vectors plus an 8-bit status PNG sidecar, and
the colour codings used for the optional visualisation export.
"""
from pathlib import Path

import cv2
import numpy as np

from src.correspondence.field import FlowField, FlowStatus
from src.errors import InputError, IoFailure

FLO_MAGIC = 202021.25


def write_flo(path, flow):
    """
    Writes the displacement of a FlowField as a `.flo` file.

    Layout: float32 tag 202021.25, int32 width, int32 height, then float32
    (u, v) pairs row by row.
    """
    data = np.stack([flow.du, flow.dv], axis=-1).astype("<f4")
    try:
        with open(path, "wb") as f:
            np.array([FLO_MAGIC], dtype="<f4").tofile(f)
            np.array([flow.width, flow.height], dtype="<i4").tofile(f)
            data.tofile(f)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_flo(path):
    """
    Reads a `.flo` file.

    Returns:
        np.ndarray: (H, W, 2) float32 displacement.

    Raises:
        InputError: Missing file, bad tag or truncated payload.
        IoFailure: The file exists but cannot be opened.
    """
    if not Path(path).is_file():
        raise InputError(f"{path}: missing file")
    try:
        with open(path, "rb") as f:
            magic = np.fromfile(f, "<f4", count=1)
            if magic.size != 1 or magic[0] != FLO_MAGIC:
                raise InputError(f"{path}: not a .flo file (bad tag)")
            size = np.fromfile(f, "<i4", count=2)
            if size.size != 2 or np.any(size < 0):
                raise InputError(f"{path}: truncated .flo header")
            w, h = int(size[0]), int(size[1])
            data = np.fromfile(f, "<f4", count=2 * w * h)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if data.size != 2 * w * h:
        raise InputError(f"{path}: expected {2 * w * h} values, found {data.size}")
    return data.reshape(h, w, 2)


def write_png(path, image):
    if not cv2.imwrite(str(path), image):
        raise IoFailure(f"cannot write {path}")


def read_png(path):
    """Reads an 8- or 16-bit single-channel PNG unchanged."""
    if not Path(path).is_file():
        raise InputError(f"{path}: missing file")
    image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise InputError(f"{path}: not a readable PNG")
    return image


def status_path(flo_path):
    flo_path = Path(flo_path)
    return flo_path.with_name(flo_path.stem + ".status.png")


def write_flow(path, flow):
    """`.flo` file plus its status sidecar."""
    write_flo(path, flow)
    write_png(status_path(path), flow.status)


def read_flow(path):
    """
    Reads a `.flo` file and its status sidecar back into a FlowField.

    Raises:
        InputError: Either file is malformed or their sizes disagree.
    """
    vectors = read_flo(path)
    status = read_png(status_path(path))
    if status.shape != vectors.shape[:2]:
        raise InputError(f"{path}: status plane {status.shape} does not match flow {vectors.shape[:2]}")
    if status.max(initial=0) > max(FlowStatus):
        raise InputError(f"{path}: unknown status value {int(status.max())}")
    return FlowField(vectors[..., 0], vectors[..., 1], status)


def flow_to_color(flow, max_magnitude=None):
    """
    Hue-wheel rendering: direction sets the hue, magnitude the saturation.
    Pixels that are not valid are drawn black.

    Returns:
        np.ndarray: (H, W, 3) uint8 BGR image.
    """
    magnitude, angle = cv2.cartToPolar(flow.du.astype(np.float32), flow.dv.astype(np.float32), angleInDegrees=True)
    valid = flow.valid
    scale = max_magnitude or max(float(magnitude[valid].max(initial=0.0)), 1e-6)
    hsv = np.zeros((flow.height, flow.width, 3), dtype=np.uint8)
    hsv[..., 0] = (angle / 2).astype(np.uint8)
    hsv[..., 1] = np.clip(magnitude / scale * 255, 0, 255).astype(np.uint8)
    hsv[..., 2] = np.where(valid, 255, 0).astype(np.uint8)
    return cv2.cvtColor(hsv, cv2.COLOR_HSV2BGR)


def instance_colors(labels):
    """Fixed id -> colour hash; label 0 stays black."""
    ids = labels.astype(np.uint32)
    hashed = (ids * np.uint32(2654435761)) & np.uint32(0xFFFFFF)
    image = np.stack([(hashed >> shift) & 0xFF for shift in (0, 8, 16)], axis=-1).astype(np.uint8)
    image[ids == 0] = 0
    return image
