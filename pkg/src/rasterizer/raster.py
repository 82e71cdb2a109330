"""
Deterministic z-buffered triangle rasterizer and the inversion of its
interpolation.

Coverage is sampled at pixel centres. Edge functions are evaluated on a
canonical ordering of each edge's endpoints so that the two triangles sharing
an edge see exactly opposite values; together with the top-left tie rule this
puts every pixel on a shared edge into exactly one triangle.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed

from src.errors import DegenerateTriangle
from src.rasterizer.camera import Viewport, model_view_projection, project_points
from src.settings import settings
from src.shader_ir.interpreter import execute_program
from src.shader_ir.rewriting import gbuffer_slots, inject_gbuffer_writes
from src.shader_ir.skinning import skin_vertices
from src.trace_model import BACKGROUND
from src.trace_model.types import GBuffer, Visibility
from src.utils import homogeneous

AREA_EPSILON = 1e-12
CLIP_EPSILON = 1e-9
INSIDE_EPSILON = 1e-6
OPAQUE_ALPHA = 0.5


class Barycentrics(NamedTuple):
    l0: float
    l1: float
    l2: float

    def interpolate(self, attributes):
        a = np.asarray(attributes, dtype=np.float64)
        return self.l0 * a[0] + self.l1 * a[1] + self.l2 * a[2]

    @property
    def inside(self):
        return min(self) >= -INSIDE_EPSILON and abs(sum(self) - 1.0) <= INSIDE_EPSILON


def edge_function(a, b, p):
    """
    Signed doubled area of (a, b, p), antisymmetric in (a, b) down to the last bit.

    Args:
        a, b (np.ndarray): Edge endpoints (..., 2).
        p (np.ndarray): Query points (..., 2).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    swap = (a[..., 0] > b[..., 0]) | ((a[..., 0] == b[..., 0]) & (a[..., 1] > b[..., 1]))
    lo = np.where(swap[..., None], b, a)
    hi = np.where(swap[..., None], a, b)
    value = (hi[..., 0] - lo[..., 0]) * (p[..., 1] - lo[..., 1]) - (hi[..., 1] - lo[..., 1]) * (p[..., 0] - lo[..., 0])
    return np.where(swap, -value, value)


def screen_barycentrics(pixels, triangles):
    """
    Screen-space (affine) barycentrics.

    Args:
        pixels (np.ndarray): (..., 2) query points.
        triangles (np.ndarray): (..., 3, 2) projected vertices.

    Returns:
        tuple[np.ndarray, np.ndarray]: (..., 3) barycentrics and the (...) doubled signed area.
    """
    tri = np.asarray(triangles, dtype=np.float64)
    v0, v1, v2 = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    area = edge_function(v0, v1, v2)
    edges = np.stack([edge_function(v1, v2, pixels), edge_function(v2, v0, pixels),
                      edge_function(v0, v1, pixels)], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return edges / area[..., None], area


def perspective_correct(screen_bary, clip_w):
    """Turns screen-space barycentrics into attribute weights: (λᵢ/wᵢ) / Σ(λⱼ/wⱼ)."""
    scaled = screen_bary / np.asarray(clip_w, dtype=np.float64)
    return scaled / scaled.sum(axis=-1, keepdims=True)


def invert_interpolation(pixel, triangle, clip_w):
    """
    Recovers the perspective-correct barycentrics the rasterizer used at a pixel.

    Args:
        pixel (array-like): Pixel coordinates (x, y).
        triangle (array-like): (3, 2) projected vertex positions in pixels.
        clip_w (array-like): (3,) clip-space w of the vertices.

    Returns:
        Barycentrics: Weights that interpolate vertex attributes to the pixel.

    Raises:
        DegenerateTriangle: Screen-space area below 1e-12.
    """
    bary, area = screen_barycentrics(np.asarray(pixel, dtype=np.float64), triangle)
    if not abs(area) > AREA_EPSILON:
        raise DegenerateTriangle(f"screen-space area {float(area):.3g} is degenerate")
    return Barycentrics(*(float(v) for v in perspective_correct(bary, clip_w)))


def invert_interpolation_batch(pixels, triangles, clip_w):
    """Vectorised `invert_interpolation`; rows of degenerate triangles come back as NaN."""
    bary, area = screen_barycentrics(pixels, triangles)
    weights = perspective_correct(bary, clip_w)
    weights[~(np.abs(area) > AREA_EPSILON)] = np.nan
    return weights


def object_vertices(draw, seq):
    """
    Object-space vertex positions of a draw, in vertex-buffer order.

    Skinned draws run the position slice of their vertex program with the
    draw's bones; rigid draws use the rest positions.
    """
    mesh = seq.mesh(draw.mesh_ref)
    if not draw.is_skinned:
        return mesh.positions.astype(np.float64)
    return skin_vertices(seq.shader(draw.shader_ref), mesh.positions, mesh.skin_indices,
                         mesh.skin_weights, draw.bones)


@dataclass(eq=False)
class RasterResult:
    gbuffer: GBuffer
    depth: np.ndarray  # (H, W) float64 depth of the written fragments
    barycentrics: np.ndarray  # (H, W, 3) perspective-correct weights, NaN on background
    fragments: np.ndarray  # (D,) fragments each draw produced inside the viewport

    def coverage(self):
        """Final pixel count per draw."""
        covered = self.gbuffer.covered
        return np.bincount(self.gbuffer.draw_index[covered].astype(np.int64), minlength=len(self.fragments))

    def visibility(self):
        coverage = self.coverage()
        return [Visibility.CULLED if self.fragments[d] == 0
                else Visibility.DEPTH_FAILED if coverage[d] == 0
                else Visibility.RENDERED for d in range(len(self.fragments))]


class _PixelStage:
    """Injected pixel program of one draw, run on batches of fragments."""

    def __init__(self, program, draw_index):
        self.slots = gbuffer_slots(program)
        self.program = inject_gbuffer_writes(program, draw_index)
        self.arity = self.program.output(self.slots.depth_output).arity

    def run(self, px, py, depth):
        count = len(px)
        v0 = np.stack([px, py, depth, np.ones(count)], axis=1).astype(np.float32)
        inputs = {d.name: np.zeros((count, d.arity), dtype=np.float32) for d in self.program.input_decls}
        inputs["v0"] = v0
        constants = {d.name: np.zeros((count, d.arity), dtype=np.float32) for d in self.program.constant_decls}
        out = execute_program(self.program, inputs, constants)
        tags = np.rint(out[self.slots.id_output][:, 0]).astype(np.uint32)
        if self.arity < 4:
            return tags, np.ones(count)
        return tags, np.clip(out[self.slots.depth_output][:, 3].astype(np.float64), 0.0, 1.0)


def _top_left(direction):
    dx, dy = direction
    return dy < 0 or (dy == 0 and dx > 0)


class _ProjectedDraw(NamedTuple):
    triangles: np.ndarray
    xy: np.ndarray
    z: np.ndarray
    w: np.ndarray
    stage: "_PixelStage | None"


def _project_draws(frame, seq, vp):
    projected = []
    for d, draw in enumerate(frame.draws):
        mvp = model_view_projection(frame.projection, frame.view, draw.world)
        xy, z, w = project_points(mvp, homogeneous(object_vertices(draw, seq)), vp)
        stage = None
        if draw.pixel_shader_ref is not None:
            stage = _PixelStage(seq.shader(draw.pixel_shader_ref), d)
        projected.append(_ProjectedDraw(seq.mesh(draw.mesh_ref).triangles, xy, z, w, stage))
    return projected


def _render_band(projected, width, rows):
    """Rasterizes every draw into the pixel rows [rows.start, rows.stop)."""
    top, bottom = rows.start, rows.stop - 1
    height = bottom - top + 1
    depth = np.ones((height, width))
    alpha = np.zeros((height, width))
    draw_index = np.full((height, width), BACKGROUND, dtype=np.uint32)
    primitive = np.full((height, width), BACKGROUND, dtype=np.uint32)
    bary = np.full((height, width, 3), np.nan)
    fragments = np.zeros(len(projected), dtype=np.int64)

    for d, (triangles, xy, z, w, stage) in enumerate(projected):
        for t, tri in enumerate(triangles):
            tw, tz, txy = w[tri], z[tri], xy[tri]
            if not np.all(tw > CLIP_EPSILON) or not np.all((tz >= 0) & (tz <= 1)):
                continue
            area = float(edge_function(txy[0], txy[1], txy[2]))
            if abs(area) <= AREA_EPSILON:
                continue
            x0 = max(int(np.ceil(txy[:, 0].min() - 0.5)), 0)
            x1 = min(int(np.floor(txy[:, 0].max() - 0.5)), width - 1)
            y0 = max(int(np.ceil(txy[:, 1].min() - 0.5)), top)
            y1 = min(int(np.floor(txy[:, 1].max() - 0.5)), bottom)
            if x0 > x1 or y0 > y1:
                continue
            gx, gy = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
            gx, gy = gx.ravel(), gy.ravel()
            points = np.stack([gx + 0.5, gy + 0.5], axis=1)

            sign = 1.0 if area > 0 else -1.0
            ends = ((1, 2), (2, 0), (0, 1))
            inside = np.ones(len(points), dtype=bool)
            edges = []
            for a, b in ends:
                e = sign * edge_function(txy[a], txy[b], points)
                rule = _top_left(sign * (txy[b] - txy[a]))
                inside &= (e > 0) | ((e == 0) & rule)
                edges.append(e)
            count = int(inside.sum())
            if not count:
                continue
            fragments[d] += count

            lam = np.stack(edges, axis=1)[inside] / abs(area)
            px, py = gx[inside], gy[inside]
            ry = py - top
            frag_depth = (lam * tz).sum(axis=1)
            passing = frag_depth < depth[ry, px]
            if not passing.any():
                continue
            px, py, ry, lam, frag_depth = px[passing], py[passing], ry[passing], lam[passing], frag_depth[passing]
            if stage is not None:
                tags, frag_alpha = stage.run(px + 0.5, py + 0.5, frag_depth)
            else:
                tags, frag_alpha = np.full(len(px), d, dtype=np.uint32), np.ones(len(px))

            alpha[ry, px] = frag_alpha + alpha[ry, px] * (1.0 - frag_alpha)
            opaque = frag_alpha >= OPAQUE_ALPHA
            px, ry = px[opaque], ry[opaque]
            depth[ry, px] = frag_depth[opaque]
            draw_index[ry, px] = tags[opaque]
            primitive[ry, px] = t
            bary[ry, px] = perspective_correct(lam[opaque], tw)

    return depth, alpha, draw_index, primitive, bary, fragments


def render_frame(frame, seq, viewport=None, threads=None):
    """
    Rasterizes every draw of a frame in submission order.

    The image is cut into horizontal bands rendered on a thread pool; each
    band replays all draws in order, so the result does not depend on the
    thread count.

    Args:
        frame (FrameRecord): Frame to render (its stored G-buffer is ignored).
        seq (TraceSequence): Provides meshes and shader programs.
        viewport (Viewport): Defaults to the sequence resolution.
        threads (int): Worker threads; defaults to settings.THREADS.

    Returns:
        RasterResult: G-buffer plus float64 depth, barycentrics and fragment counts.
    """
    vp = viewport or Viewport.of(seq)
    threads = max(1, min(threads or settings.THREADS, vp.height))
    projected = _project_draws(frame, seq, vp)
    cuts = np.linspace(0, vp.height, threads + 1).astype(int)
    bands = [range(a, b) for a, b in zip(cuts, cuts[1:]) if b > a]
    parts = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_render_band)(projected, vp.width, rows) for rows in bands)

    depth, alpha, draw_index, primitive, bary = (np.concatenate([p[k] for p in parts]) for k in range(5))
    fragments = np.sum([p[5] for p in parts], axis=0)
    gbuffer = GBuffer(draw_index=draw_index, primitive_index=primitive,
                      ndc_depth=depth.astype(np.float32), alpha=alpha.astype(np.float32))
    return RasterResult(gbuffer=gbuffer, depth=depth, barycentrics=bary, fragments=fragments)


def rasterize_frame(frame, seq):
    """
    Renders a frame into a fresh G-buffer.

    Args:
        frame (FrameRecord): Frame whose draws are rendered.
        seq (TraceSequence): Sequence context (meshes, shaders, resolution).

    Returns:
        GBuffer: Draw, primitive, depth and alpha planes.
    """
    return render_frame(frame, seq).gbuffer
