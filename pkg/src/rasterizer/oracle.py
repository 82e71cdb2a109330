"""
Scene generator and independent ground truth.

`generate_scene` expands a SceneScript into a TraceSequence (what capture
would have recorded) and an OracleGroundTruth computed from the script and the
rasterizer's own per-pixel barycentrics, never from the G-buffer inversion the
derivation engine uses.
"""
from dataclasses import dataclass, field

import numpy as np

from src.correspondence.field import FlowField, FlowStatus
from src.instances.clustering import VOID
from src.instances.layout import box_from_vertices
from src.rasterizer import primitives
from src.rasterizer.camera import Viewport, model_view_projection, project_points
from src.rasterizer.raster import render_frame
from src.rasterizer.scene import validate_script
from src.settings import LOGGER, settings
from src.shader_ir.skinning import load_listing
from src.trace_model import RIGID
from src.trace_model.types import DrawCall, FrameRecord, GBuffer, Mesh, TraceSequence, Visibility
from src.utils import homogeneous

SKINNING_SHADER = 1
SURFACE_SHADER = 2


@dataclass(eq=False)
class OracleGroundTruth:
    poses: list  # (4, 4) scripted camera-to-world per frame
    draw_objects: list  # per frame: object index of each draw
    draw_parts: list  # per frame: part name of each draw
    track_ids: list  # per frame: persistent id of each draw, from (object, part)
    instance_labels: list  # per frame: (H, W) uint16
    semantic_labels: list  # per frame: (H, W) uint8
    instance_objects: list  # per frame: {instance label: object index}
    instance_classes: list  # per frame: {instance label: scripted class}
    boxes: list  # per frame: list of BBox3D
    flow: dict = field(default_factory=dict)  # (f, g) -> FlowField
    rasters: list = field(default_factory=list, repr=False)

    def pair_mapping(self, f, g):
        """Draw of frame f -> draw of frame g carrying the same (object, part)."""
        where = {tid: d for d, tid in enumerate(self.track_ids[g])}
        return {d: where[tid] for d, tid in enumerate(self.track_ids[f]) if tid in where}


# Scene expansion
class _MeshRegistry:
    def __init__(self):
        self.meshes = []
        self.keys = {}

    def get(self, key, build):
        if key not in self.keys:
            built = build()
            positions, triangles = built[0], built[1]
            skin = built[2:] if len(built) == 4 else (None, None)
            self.keys[key] = len(self.meshes)
            self.meshes.append(Mesh(len(self.meshes), positions, triangles, *skin))
        return self.keys[key]


def _parts(obj, detail):
    """(part name, mesh key, builder, class id, skinned) for one object at one detail level."""
    size = tuple(obj.size)
    if obj.primitive == "box":
        return [("main", ("box", size, detail), lambda: primitives.box(size, detail), obj.class_id, False)]
    if obj.primitive == "icosphere":
        return [("main", ("icosphere", size[0], detail),
                 lambda: primitives.icosphere(size[0] / 2.0, detail), obj.class_id, False)]
    if obj.primitive == "strip":
        return [("main", ("strip", size, detail),
                 lambda: primitives.strip(size, 4 * detail, 8 * detail), obj.class_id, True)]
    parts = []
    for name, spec, own_class in primitives.VEHICLE_PARTS:
        parts.append((name, ("vehicle", name, detail), lambda spec=spec: primitives.vehicle_part(spec, detail),
                      obj.class_id if own_class else obj.wheel_class, False))
    return parts


def _skin64(mesh, bones):
    """Linear blend skinning in float64, straight from the blend formula."""
    rest = homogeneous(mesh.positions.astype(np.float64))
    bones = np.asarray(bones, dtype=np.float64)
    out = np.zeros_like(rest)
    for slot in range(mesh.skin_indices.shape[1]):
        moved = np.einsum("nij,nj->ni", bones[mesh.skin_indices[:, slot]], rest)
        out += mesh.skin_weights[:, slot:slot + 1].astype(np.float64) * moved
    return out[:, :3] / out[:, 3:4]


def _vertices64(mesh, draw):
    if draw.shader_ref == RIGID:
        return mesh.positions.astype(np.float64)
    return _skin64(mesh, draw.bones)


def oracle_flow(seq, truth, f, g, tolerance=None):
    """
    Ground-truth flow from frame position f to g.

    Surface points come from the rasterizer's barycentrics at f; skinned
    surfaces are re-posed with frame g's bones in float64.

    Returns:
        FlowField: Displacements and statuses for every pixel of frame f.
    """
    tolerance = settings.OCCLUSION_TOLERANCE if tolerance is None else tolerance
    frame_f, frame_g = seq.frames[f], seq.frames[g]
    raster_f, raster_g = truth.rasters[f], truth.rasters[g]
    vp = Viewport.of(seq)
    flow = FlowField.background(vp.width, vp.height)
    du, dv, status = flow.du, flow.dv, flow.status
    mapping = truth.pair_mapping(f, g)
    gb = raster_f.gbuffer

    for d in np.unique(gb.draw_index[gb.covered]):
        d = int(d)
        ys, xs = np.nonzero(gb.draw_index == d)
        if d not in mapping:
            status[ys, xs] = FlowStatus.UNTRACKED
            continue
        draw_f, draw_g = frame_f.draws[d], frame_g.draws[mapping[d]]
        mesh_f = seq.mesh(draw_f.mesh_ref)
        if draw_f.shader_ref != RIGID and draw_g.mesh_ref != draw_f.mesh_ref:
            status[ys, xs] = FlowStatus.UNTRACKED
            continue
        tris = mesh_f.triangles[gb.primitive_index[ys, xs].astype(np.int64)]
        lam = raster_f.barycentrics[ys, xs]
        # rigid: object-space point; skinned: same barycentrics on g's posed triangle
        source = _vertices64(mesh_f, draw_g if draw_f.shader_ref != RIGID else draw_f)
        points = np.einsum("nk,nkj->nj", lam, source[tris])

        mvp_g = model_view_projection(frame_g.projection, frame_g.view, draw_g.world)
        pixel_g, depth_g, w_g = project_points(mvp_g, homogeneous(points), vp)
        du[ys, xs] = pixel_g[:, 0] - (xs + 0.5)
        dv[ys, xs] = pixel_g[:, 1] - (ys + 0.5)

        inside = (w_g > 0) & vp.contains(pixel_g)
        code = np.full(len(xs), FlowStatus.OUT_OF_VIEW, dtype=np.uint8)
        cx = np.floor(pixel_g[inside, 0]).astype(np.int64)
        cy = np.floor(pixel_g[inside, 1]).astype(np.int64)
        hidden = depth_g[inside] > raster_g.depth[cy, cx] + tolerance
        code[inside] = np.where(hidden, FlowStatus.OCCLUDED, FlowStatus.VALID)
        status[ys, xs] = code
    return FlowField(du, dv, status)


def _frame_truth(script, objects, frame_pos, frame, raster, keys, seq):
    """Instance labels, semantic labels and boxes of one frame, from the script."""
    rendered = [d for d, draw in enumerate(frame.draws) if draw.visibility == Visibility.RENDERED]
    first_draw = {}
    for d in rendered:
        first_draw.setdefault(keys[d][0], d)
    ordered = sorted(first_draw, key=first_draw.get)
    label_of = {obj: k for k, obj in enumerate(ordered, start=1)}

    lookup = np.zeros(len(frame.draws) + 1, dtype=np.uint16)
    classes = np.full(len(ordered) + 1, VOID, dtype=np.uint8)
    for d in rendered:
        lookup[d] = label_of[keys[d][0]]
    for obj, label in label_of.items():
        classes[label] = objects[obj].class_id
    gb = raster.gbuffer
    labels = np.zeros(gb.draw_index.shape, dtype=np.uint16)
    labels[gb.covered] = lookup[gb.draw_index[gb.covered].astype(np.int64)]

    view = script.view(frame_pos)
    boxes = []
    for obj, label in label_of.items():
        spec = objects[obj]
        members = [d for d in rendered if keys[d][0] == obj]
        vertices = np.concatenate([_vertices64(seq.mesh(frame.draws[d].mesh_ref), frame.draws[d]) for d in members])
        boxes.append(box_from_vertices(vertices, view @ spec.world(frame_pos), label, spec.class_id))
    return labels, classes[labels], {label: obj for obj, label in label_of.items()}, \
        {label: objects[obj].class_id for obj, label in label_of.items()}, boxes


def generate_scene(script, threads=None):
    """
    Expands a scene script into a trace and its oracle ground truth.

    Args:
        script (SceneScript): Scene to render.
        threads (int): Rasterizer worker threads; defaults to settings.THREADS.

    Returns:
        tuple[TraceSequence, OracleGroundTruth]: The recorded trace and the independent truth.

    Raises:
        InvalidScript: The script fails validation.
    """
    validate_script(script)
    objects = script.all_objects()
    width, height = script.resolution
    registry = _MeshRegistry()
    shaders = [load_listing("skinning.vsh", SKINNING_SHADER), load_listing("surface.psh", SURFACE_SHADER)]
    projection = script.projection().astype(np.float32)

    # Submission lists first, so mesh ids follow first use
    submissions = []
    for k in range(script.frames):
        draws, keys = [], []
        for index, obj in enumerate(objects):
            if not obj.present(k):
                continue
            world = obj.world(k)
            for part, key, build, class_id, skinned in _parts(obj, obj.detail(k)):
                mesh_id = registry.get(key, build)
                draws.append(DrawCall(
                    mesh_ref=mesh_id, world=world, segment_id=mesh_id, class_id=class_id,
                    shader_ref=SKINNING_SHADER if skinned else RIGID,
                    bones=obj.bones(k) if skinned else None, pixel_shader_ref=SURFACE_SHADER,
                ))
                keys.append((index, part))
        submissions.append((draws, keys))

    context = TraceSequence(list(script.class_table), registry.meshes, shaders, [], (width, height))
    frames, rasters = [], []
    for k, (draws, _) in enumerate(submissions):
        frame = FrameRecord(k, script.view(k), projection, draws, GBuffer.empty(width, height))
        raster = render_frame(frame, context, threads=threads)
        for draw, visibility in zip(draws, raster.visibility()):
            draw.visibility = visibility
        frame.gbuffer = raster.gbuffer
        frames.append(frame)
        rasters.append(raster)
    seq = TraceSequence(list(script.class_table), registry.meshes, shaders, frames, (width, height))

    track_of = {}
    truth = OracleGroundTruth(
        poses=[script.camera_pose(k) for k in range(script.frames)],
        draw_objects=[[key[0] for key in keys] for _, keys in submissions],
        draw_parts=[[key[1] for key in keys] for _, keys in submissions],
        track_ids=[[track_of.setdefault(key, len(track_of) + 1) for key in keys] for _, keys in submissions],
        instance_labels=[], semantic_labels=[], instance_objects=[], instance_classes=[], boxes=[],
        rasters=rasters,
    )
    for k, frame in enumerate(frames):
        labels, semantic, owners, classes, boxes = _frame_truth(
            script, objects, k, frame, rasters[k], submissions[k][1], seq)
        truth.instance_labels.append(labels)
        truth.semantic_labels.append(semantic)
        truth.instance_objects.append(owners)
        truth.instance_classes.append(classes)
        truth.boxes.append(boxes)
    for k in range(script.frames - 1):
        truth.flow[(k, k + 1)] = oracle_flow(seq, truth, k, k + 1)

    culled = sum(d.visibility == Visibility.CULLED for f in frames for d in f.draws)
    LOGGER.info(f"Generated {script.name!r}: {len(objects)} object(s), {len(frames)} frame(s), "
                f"{len(registry.meshes)} mesh(es), {culled} culled draw(s)")
    return seq, truth


def scene_summary(seq, script):
    """Counts recorded in the generator manifest."""
    draws = [d for f in seq.frames for d in f.draws]
    return {
        "name": script.name,
        "seed": script.seed,
        "objects": len(script.all_objects()),
        "frames": len(seq.frames),
        "meshes": len(seq.meshes),
        "draws": len(draws),
        "draws_per_frame": [len(f.draws) for f in seq.frames],
        "rendered_draws": sum(d.visibility == Visibility.RENDERED for d in draws),
        "culled_draws": sum(d.visibility == Visibility.CULLED for d in draws),
        "depth_failed_draws": sum(d.visibility == Visibility.DEPTH_FAILED for d in draws),
        "resolution": list(seq.resolution),
    }
