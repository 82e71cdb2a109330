"""
`derive`: every ground-truth output of a trace, computed from the trace alone.

Frames and frame pairs are processed by a thread pool; results are collected
in order and written from the calling thread. Output goes to a staging
directory that replaces the target only once everything has been written.
"""
import argparse
import shutil
from datetime import datetime, timezone
from pathlib import Path

from joblib import Parallel, delayed

from src.commands import run_command
from src.commands.exports import (FORMATS, write_frame, write_manifest, write_pair_flow, write_poses,
                                  write_tracks, write_visuals)
from src.correspondence.flow import dense_flow_pair
from src.correspondence.poses import camera_pose
from src.errors import EmptyGeometry, InputError, IoFailure
from src.instances.clustering import cluster_instances, instance_boundaries, instance_mask
from src.instances.layout import bbox3d
from src.settings import LOGGER, settings
from src.trace_model.container import load_trace
from src.tracking.tracker import persistent_instance_ids, track_sequence


def _frame_outputs(seq, k):
    frame = seq.frames[k]
    instance_map = cluster_instances(frame)
    labels, semantic = instance_mask(frame, instance_map)
    boxes = []
    for instance in instance_map.instances:
        try:
            boxes.append(bbox3d(instance, frame, seq))
        except EmptyGeometry as exc:
            LOGGER.warning(str(exc))
    return instance_map, labels, semantic, instance_boundaries(labels), boxes, camera_pose(frame)


def _track_rows(seq, tracks, instance_maps):
    rows = []
    for k, frame in enumerate(seq.frames):
        ids = tracks.frame_tracks[k]
        owner = instance_maps[k].draw_instances()
        persistent = persistent_instance_ids(instance_maps[k], ids)
        for d, draw in enumerate(frame.draws):
            x, y, z = draw.position
            instance = owner.get(d, 0)
            rows.append([frame.frame_index, d, ids[d], instance, persistent.get(instance, 0),
                         draw.class_id, False, x, y, z])
        for track_id, entry in sorted(tracks.extrapolated(k).items()):
            x, y, z = entry.position
            rows.append([frame.frame_index, -1, track_id, 0, 0, tracks.track(track_id).class_id, True, x, y, z])
    return rows


def _staging_dir(out):
    return out.with_name(f".{out.name}.staging")


def _publish(staging, out):
    if out.exists() and not (out / "manifest.json").is_file():
        raise IoFailure(f"{out} exists and is not a previous output directory")
    try:
        if out.exists():
            shutil.rmtree(out)
        staging.rename(out)
    except OSError as exc:
        raise IoFailure(f"cannot publish {out}: {exc}") from exc


def cmd_derive(trace, out, threads=None, max_extrapolation=None, export_vis=False, formats=FORMATS):
    """
    Derives instance, semantic, box, pose, track and flow ground truth from a trace.

    Args:
        trace (str | Path): Trace file.
        out (str | Path): Output directory.
        threads (int): Worker threads; defaults to settings.THREADS.
        max_extrapolation (int): Frames a lost track is extrapolated.
        export_vis (bool): Also write colour renderings under vis/.
        formats (Iterable[str]): Output kinds to write ('png', 'flo', 'txt').

    Raises:
        InputError: The trace is missing or malformed.
        IoFailure: Outputs cannot be written.
    """
    trace, out = Path(trace), Path(out)
    if not trace.is_file():
        raise InputError(f"{trace}: trace file not found")
    threads = threads or settings.THREADS
    formats = tuple(formats)
    seq = load_trace(trace)
    tracks = track_sequence(seq, max_extrapolation)
    pairs = [(f, f + 1) for f in range(len(seq.frames) - 1)]

    pool = Parallel(n_jobs=threads, prefer="threads")
    frames = pool(delayed(_frame_outputs)(seq, k) for k in range(len(seq.frames)))
    flows = pool(delayed(dense_flow_pair)(seq, f, g, tracks.mapping(f, g)) for f, g in pairs) \
        if "flo" in formats or export_vis else [None] * len(pairs)

    staging = _staging_dir(out)
    try:
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
    except OSError as exc:
        raise IoFailure(f"cannot create staging directory {staging}: {exc}") from exc
    try:
        written = []
        if "txt" in formats:
            written.append(write_poses(staging, [pose.matrix for *_, pose in frames]))
            written.append(write_tracks(staging, _track_rows(seq, tracks, [f[0] for f in frames])))
        for k, (_, labels, semantic, boundaries, boxes, _) in enumerate(frames):
            written += write_frame(staging, seq.frames[k].frame_index, labels, semantic, boundaries, boxes, formats)
        for (f, g), flow in zip(pairs, flows):
            fi, gi = seq.frames[f].frame_index, seq.frames[g].frame_index
            if "flo" in formats:
                written += write_pair_flow(staging, fi, gi, flow)
            if export_vis:
                written += write_visuals(staging, fi, frames[f][1], flow, gi)
        if export_vis and len(frames) == 1:
            written += write_visuals(staging, seq.frames[0].frame_index, frames[0][1])
        write_manifest(staging, {
            "kind": "derived",
            "trace": str(trace),
            "frames": [frame.frame_index for frame in seq.frames],
            "pairs": [[seq.frames[f].frame_index, seq.frames[g].frame_index] for f, g in pairs],
            "tracks": len(tracks.tracks),
            "config": {"threads": threads, "max_extrapolation": tracks.max_extrapolation_frames,
                       "export_vis": export_vis, "formats": list(formats)},
            "files": sorted(str(Path(p).relative_to(staging)) for p in written),
            "generated_at": datetime.now(timezone.utc).isoformat(),
        })
        _publish(staging, out)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    LOGGER.info(f"Derived {len(seq.frames)} frame(s), {len(pairs)} flow pair(s) and "
                f"{len(tracks.tracks)} track(s) into {out}")


def add_arguments(parser):
    parser.add_argument("--trace", type=str, required=True, help="Trace file")
    parser.add_argument("--out", type=str, required=True, help="Output directory")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (default: TRACEGT_THREADS)")
    parser.add_argument("--max-extrapolation", type=int, default=None,
                        help="Frames a lost track is extrapolated before it retires")
    parser.add_argument("--export-vis", action="store_true", help="Write colour renderings under vis/")
    parser.add_argument("--format", nargs="+", choices=FORMATS, default=list(FORMATS), dest="formats",
                        help="Output kinds to write")


def run(args):
    return run_command(cmd_derive, args.trace, args.out, threads=args.threads,
                       max_extrapolation=args.max_extrapolation, export_vis=args.export_vis, formats=args.formats)


def main(argv=None):
    parser = argparse.ArgumentParser(description="Derive ground truth from a recorded trace")
    add_arguments(parser)
    return run(parser.parse_args(argv))


if __name__ == "__main__":
    raise SystemExit(main())
