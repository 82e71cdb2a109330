from dataclasses import dataclass

import numpy as np

from src.shader_ir import PIXEL, VERTEX
from src.trace_model import BACKGROUND, RIGID

WEIGHT_TOLERANCE = 1e-5


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    frame: int | None = None
    draw: int | None = None
    mesh: int | None = None
    vertex: int | None = None

    def __str__(self):
        where = [f"{k}={v}" for k, v in (("frame", self.frame), ("draw", self.draw),
                                         ("mesh", self.mesh), ("vertex", self.vertex)) if v is not None]
        return f"[{self.code}] {self.message}" + (f" ({', '.join(where)})" if where else "")


def _check_classes(seq):
    seen = set()
    for cls in seq.class_table:
        if cls.class_id in seen:
            yield Violation("duplicate-class", f"class id {cls.class_id} defined twice")
        seen.add(cls.class_id)
        if cls.max_speed < 0:
            yield Violation("negative-speed", f"class {cls.name!r} has a negative speed cap")
        elif cls.is_dynamic and cls.max_speed <= 0:
            yield Violation("dynamic-speed", f"dynamic class {cls.name!r} needs a positive speed cap")


def _check_meshes(seq):
    seen = set()
    for mesh in seq.meshes:
        if mesh.mesh_id in seen:
            yield Violation("duplicate-mesh", f"mesh id {mesh.mesh_id} defined twice", mesh=mesh.mesh_id)
        seen.add(mesh.mesh_id)
        if len(mesh.triangles) and mesh.triangles.max() >= mesh.vertex_count:
            bad = int(np.argmax(mesh.triangles.max(axis=1) >= mesh.vertex_count))
            yield Violation("triangle-index", f"triangle {bad} indexes past {mesh.vertex_count} vertices",
                            mesh=mesh.mesh_id)
        if not mesh.is_skinned:
            continue
        if mesh.skin_weights.shape != mesh.skin_indices.shape:
            yield Violation("skin-shape", "skin indices and weights differ in shape", mesh=mesh.mesh_id)
            continue
        weights = mesh.skin_weights.astype(np.float64)
        out_of_range = np.any((weights < 0) | (weights > 1), axis=1)
        bad_sum = np.abs(weights.sum(axis=1) - 1.0) > WEIGHT_TOLERANCE
        for vertex in np.flatnonzero(out_of_range):
            yield Violation("skin-weight-range", "skin weight outside [0, 1]", mesh=mesh.mesh_id, vertex=int(vertex))
        for vertex in np.flatnonzero(bad_sum & ~out_of_range):
            yield Violation("skin-weight-sum", f"skin weights sum to {weights[vertex].sum():.6g}",
                            mesh=mesh.mesh_id, vertex=int(vertex))


def _check_draw(seq, k, d, draw):
    mesh = seq.meshes_by_id.get(draw.mesh_ref)
    if mesh is None:
        yield Violation("dangling-mesh", f"mesh {draw.mesh_ref} does not exist", frame=k, draw=d)
    if draw.class_id not in seq.classes_by_id:
        yield Violation("dangling-class", f"class {draw.class_id} does not exist", frame=k, draw=d)
    if not np.array_equal(draw.world[3], np.array([0, 0, 0, 1], dtype=np.float32)):
        yield Violation("world-bottom-row", "world matrix bottom row is not (0, 0, 0, 1)", frame=k, draw=d)
    if draw.pixel_shader_ref is not None:
        pixel = seq.shaders_by_id.get(draw.pixel_shader_ref)
        if pixel is None:
            yield Violation("dangling-pixel-shader", f"shader {draw.pixel_shader_ref} does not exist",
                            frame=k, draw=d)
        elif pixel.kind != PIXEL:
            yield Violation("shader-kind", f"shader {draw.pixel_shader_ref} is not a pixel program",
                            frame=k, draw=d)
    if draw.shader_ref == RIGID:
        return
    vertex = seq.shaders_by_id.get(draw.shader_ref)
    if vertex is None:
        yield Violation("dangling-shader", f"shader {draw.shader_ref} does not exist", frame=k, draw=d)
    elif vertex.kind != VERTEX:
        yield Violation("shader-kind", f"shader {draw.shader_ref} is not a vertex program", frame=k, draw=d)
    if mesh is not None and not mesh.is_skinned:
        yield Violation("unskinned-mesh", f"mesh {mesh.mesh_id} has no skin but the draw is skinned",
                        frame=k, draw=d)
    if draw.bones is None or len(draw.bones) == 0:
        yield Violation("missing-bones", "skinned draw carries no bone matrices", frame=k, draw=d)
    elif mesh is not None and mesh.is_skinned and mesh.skin_indices.size and \
            mesh.skin_indices.max() >= len(draw.bones):
        yield Violation("bone-index", f"mesh {mesh.mesh_id} references bone {int(mesh.skin_indices.max())} "
                                      f"but only {len(draw.bones)} are bound", frame=k, draw=d)


def _check_gbuffer(seq, k, frame):
    gb = frame.gbuffer
    shapes = {gb.draw_index.shape, gb.primitive_index.shape, gb.ndc_depth.shape, gb.alpha.shape}
    if len(shapes) != 1:
        yield Violation("plane-shape", f"G-buffer planes disagree in shape: {sorted(shapes)}", frame=k)
        return
    width, height = seq.resolution
    if gb.draw_index.shape != (height, width):
        yield Violation("gbuffer-size", f"G-buffer is {gb.width}x{gb.height}, sequence is {width}x{height}",
                        frame=k)
    covered = gb.draw_index != BACKGROUND
    if np.any(~covered & (gb.primitive_index != BACKGROUND)):
        yield Violation("primitive-sentinel", "background pixels carry a primitive index", frame=k)
    depth = gb.ndc_depth[covered]
    if depth.size and (not np.all(np.isfinite(depth)) or depth.min() < 0 or depth.max() > 1):
        yield Violation("depth-range", "covered pixels have depth outside [0, 1]", frame=k)
    if np.any(gb.draw_index[covered] >= len(frame.draws)):
        yield Violation("dangling-pixel-draw", "pixels reference draws the frame does not have", frame=k)


def validate_trace(seq):
    """
    Lists every invariant violation of a trace sequence.

    Args:
        seq (TraceSequence): Sequence to check.

    Returns:
        list[Violation]: Violations with frame/draw/mesh/vertex indices; empty when valid.
    """
    violations = []
    violations.extend(_check_classes(seq))
    violations.extend(_check_meshes(seq))
    seen = set()
    for program in seq.shaders:
        if program.shader_id in seen:
            violations.append(Violation("duplicate-shader", f"shader id {program.shader_id} defined twice"))
        seen.add(program.shader_id)

    width, height = seq.resolution
    if width <= 0 or height <= 0:
        violations.append(Violation("resolution", f"resolution {width}x{height} is empty"))

    previous = None
    for k, frame in enumerate(seq.frames):
        if previous is not None and frame.frame_index <= previous:
            violations.append(Violation("frame-order", f"frame index {frame.frame_index} follows {previous}",
                                        frame=k))
        previous = frame.frame_index
        view = frame.view.astype(np.float64)
        if not np.all(np.isfinite(view)) or abs(np.linalg.det(view)) < 1e-12:
            violations.append(Violation("singular-view", "view matrix is not invertible", frame=k))
        for d, draw in enumerate(frame.draws):
            violations.extend(_check_draw(seq, k, d, draw))
        violations.extend(_check_gbuffer(seq, k, frame))
    return violations
