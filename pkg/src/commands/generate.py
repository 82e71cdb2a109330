import argparse
from pathlib import Path

import numpy as np

from src.commands import run_command
from src.commands.exports import (write_frame, write_manifest, write_pair_flow, write_poses, write_tracks)
from src.instances.clustering import instance_boundaries
from src.rasterizer.oracle import generate_scene, scene_summary
from src.rasterizer.scene import load_scene_script
from src.settings import LOGGER
from src.trace_model.container import write_trace
from src.utils import ensure_dir

TRACE_NAME = "trace.vptr"
ORACLE_DIR = "oracle"


def _oracle_tracks(seq, truth):
    rows = []
    for k, frame in enumerate(seq.frames):
        labels = truth.instance_labels[k]
        owner = {obj: label for label, obj in truth.instance_objects[k].items()}
        persistent = {}
        for d, obj in enumerate(truth.draw_objects[k]):
            if obj in owner:
                persistent[owner[obj]] = min(persistent.get(owner[obj], truth.track_ids[k][d]), truth.track_ids[k][d])
        for d, draw in enumerate(frame.draws):
            label = owner.get(truth.draw_objects[k][d], 0)
            x, y, z = draw.position
            rows.append([frame.frame_index, d, truth.track_ids[k][d], label, persistent.get(label, 0),
                         draw.class_id, False, x, y, z])
        LOGGER.debug(f"oracle frame {frame.frame_index}: {int(labels.max(initial=0))} instance(s)")
    return rows


def write_oracle(root, seq, truth):
    """Writes the oracle ground truth in the `derive` output layout; returns the paths written."""
    root = ensure_dir(Path(root))
    written = [write_poses(root, truth.poses), write_tracks(root, _oracle_tracks(seq, truth))]
    for k, frame in enumerate(seq.frames):
        labels = truth.instance_labels[k]
        written += write_frame(root, frame.frame_index, labels, truth.semantic_labels[k],
                               instance_boundaries(labels), truth.boxes[k])
    for (f, g), flow in sorted(truth.flow.items()):
        written += write_pair_flow(root, seq.frames[f].frame_index, seq.frames[g].frame_index, flow)
    write_manifest(root, {
        "kind": "oracle",
        "frames": [frame.frame_index for frame in seq.frames],
        "pairs": [[seq.frames[f].frame_index, seq.frames[g].frame_index] for f, g in sorted(truth.flow)],
        "files": sorted(str(Path(p).relative_to(root)) for p in written),
    })
    return written


def cmd_generate(script, out, seed=None, threads=None):
    """
    Renders a scene script into a trace file plus its oracle ground truth.

    Args:
        script (str): JSON script path or `preset:NAME`.
        out (str | Path): Output directory.
        seed (int): Overrides the script's seed.
        threads (int): Rasterizer worker threads; defaults to settings.THREADS.

    Raises:
        InvalidScript: The script is missing or malformed.
        IoFailure: Outputs cannot be written.
    """
    scene = load_scene_script(script, seed=seed)
    seq, truth = generate_scene(scene, threads=threads)
    out = ensure_dir(Path(out))
    write_trace(seq, out / TRACE_NAME)
    oracle_files = write_oracle(out / ORACLE_DIR, seq, truth)
    summary = scene_summary(seq, scene)
    summary.update({
        "kind": "scene",
        "script": script,
        "trace": TRACE_NAME,
        "oracle": ORACLE_DIR,
        "oracle_files": len(oracle_files),
        "valid_flow_pixels": int(np.sum([flow.valid.sum() for flow in truth.flow.values()])),
    })
    write_manifest(out, summary)
    LOGGER.info(f"Scene {scene.name!r} written to {out}")


def add_arguments(parser):
    parser.add_argument("--script", type=str, required=True, help="Scene script path or preset:NAME")
    parser.add_argument("--out", type=str, required=True, help="Output directory")
    parser.add_argument("--seed", type=int, default=None, help="Override the script seed")
    parser.add_argument("--threads", type=int, default=None, help="Rasterizer threads (default: TRACEGT_THREADS)")


def run(args):
    return run_command(cmd_generate, args.script, args.out, seed=args.seed, threads=args.threads)


def main(argv=None):
    parser = argparse.ArgumentParser(description="Render a scene script into a trace and its oracle ground truth")
    add_arguments(parser)
    return run(parser.parse_args(argv))


if __name__ == "__main__":
    raise SystemExit(main())
