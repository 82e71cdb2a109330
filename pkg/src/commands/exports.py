"""
Readers and writers for the ground-truth output directory shared by
`generate` (oracle) and `derive`:

    manifest.json
    poses.txt                      camera-to-world, 12 values per line (3x4, row-major)
    tracks.csv
    frames/NNNNNN/instances.png    uint16 instance ids, 0 = background
    frames/NNNNNN/semantic.png     uint8 class ids, 255 = background
    frames/NNNNNN/boundaries.png   uint8, 255 on instance boundaries
    frames/NNNNNN/boxes.jsonl      one BBox3D record per line
    flow/NNNNNN_MMMMMM.flo         + NNNNNN_MMMMMM.status.png
    vis/                           optional colour renderings
"""
import json
from pathlib import Path

import numpy as np
import pandas as pd

from src.correspondence.flow_io import (flow_to_color, instance_colors, read_flow, read_png, write_flow,
                                        write_png)
from src.errors import InputError, IoFailure
from src.instances.layout import BBox3D
from src.utils import ensure_dir

FORMATS = ("png", "flo", "txt")
TRACK_COLUMNS = ["frame_index", "draw", "track_id", "instance_id", "persistent_id", "class_id",
                 "extrapolated", "x", "y", "z"]


def frame_dir(root, frame_index):
    return Path(root) / "frames" / f"{frame_index:06d}"


def flow_path(root, frame_f, frame_g):
    return Path(root) / "flow" / f"{frame_f:06d}_{frame_g:06d}.flo"


def _write_text(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_manifest(root, manifest):
    _write_text(Path(root) / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(root):
    path = Path(root) / "manifest.json"
    if not path.is_file():
        raise InputError(f"{path}: missing manifest")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_frame(root, frame_index, labels, semantic, boundaries, boxes, formats=FORMATS):
    """Per-frame label images and boxes; returns the paths written."""
    out = ensure_dir(frame_dir(root, frame_index))
    written = []
    if "png" in formats:
        for name, image in (("instances.png", labels.astype(np.uint16)),
                            ("semantic.png", semantic.astype(np.uint8)),
                            ("boundaries.png", np.where(boundaries, 255, 0).astype(np.uint8))):
            write_png(out / name, image)
            written.append(out / name)
    if "txt" in formats:
        lines = "".join(json.dumps(box.to_record(), sort_keys=True) + "\n" for box in boxes)
        _write_text(out / "boxes.jsonl", lines)
        written.append(out / "boxes.jsonl")
    return written


def read_frame_labels(root, frame_index):
    """(instance labels, semantic labels) of one frame."""
    out = frame_dir(root, frame_index)
    return read_png(out / "instances.png"), read_png(out / "semantic.png")


def read_boxes(root, frame_index):
    path = frame_dir(root, frame_index) / "boxes.jsonl"
    if not path.is_file():
        raise InputError(f"{path}: missing file")
    try:
        return [BBox3D.from_record(json.loads(line)) for line in path.read_text(encoding="utf-8").splitlines()
                if line.strip()]
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def frame_indices(root):
    """Frame indices present under frames/, ascending."""
    frames = Path(root) / "frames"
    if not frames.is_dir():
        raise InputError(f"{frames}: missing directory")
    return sorted(int(p.name) for p in frames.iterdir() if p.is_dir() and p.name.isdigit())


def write_pair_flow(root, frame_f, frame_g, flow):
    path = flow_path(root, frame_f, frame_g)
    ensure_dir(path.parent)
    write_flow(path, flow)
    return [path, path.with_name(path.stem + ".status.png")]


def read_pair_flow(root, frame_f, frame_g):
    return read_flow(flow_path(root, frame_f, frame_g))


def flow_pairs(root):
    """(f, g) frame-index pairs with a flow file, ascending."""
    flow = Path(root) / "flow"
    if not flow.is_dir():
        return []
    pairs = []
    for path in flow.glob("*.flo"):
        first, _, second = path.stem.partition("_")
        if first.isdigit() and second.isdigit():
            pairs.append((int(first), int(second)))
    return sorted(pairs)


def write_poses(root, poses):
    """KITTI-style pose file: the top 3x4 block of each camera-to-world matrix per line."""
    lines = "".join(" ".join(f"{v:.9e}" for v in np.asarray(p, dtype=np.float64)[:3, :].ravel()) + "\n"
                    for p in poses)
    path = Path(root) / "poses.txt"
    _write_text(path, lines)
    return path


def read_poses(root):
    path = Path(root) / "poses.txt"
    if not path.is_file():
        raise InputError(f"{path}: missing file")
    poses = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            values = np.array([float(v) for v in line.split()])
        except ValueError as exc:
            raise InputError(f"{path}:{number}: {exc}") from exc
        if values.size != 12:
            raise InputError(f"{path}:{number}: expected 12 values, found {values.size}")
        pose = np.eye(4)
        pose[:3, :] = values.reshape(3, 4)
        poses.append(pose)
    return poses


def write_tracks(root, rows):
    path = Path(root) / "tracks.csv"
    try:
        pd.DataFrame(rows, columns=TRACK_COLUMNS).to_csv(path, index=False)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def write_visuals(root, frame_index, labels, flow=None, next_index=None):
    out = ensure_dir(Path(root) / "vis")
    written = [out / f"{frame_index:06d}_instances.png"]
    write_png(written[0], instance_colors(labels))
    if flow is not None:
        written.append(out / f"{frame_index:06d}_{next_index:06d}_flow.png")
        write_png(written[1], flow_to_color(flow))
    return written
