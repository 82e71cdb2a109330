"""
Dense ground-truth correspondences between two recorded frames.

Every covered pixel of frame f is taken back to object space through the
matrices recorded with its draw (rigid draws) or through the inverted
rasterizer interpolation over the skinned mesh (skinned draws), then pushed
forward through the matching draw of the target frame.
"""
import numpy as np

from src.correspondence.field import FlowField, FlowStatus
from src.correspondence.geometry import unproject_pixels
from src.errors import GroundTruthError
from src.rasterizer.camera import Viewport, model_view_projection, project_points
from src.rasterizer.raster import invert_interpolation_batch, object_vertices
from src.settings import LOGGER, settings
from src.utils import homogeneous


def _rigid_points(frame, draw, xs, ys, viewport):
    depth = frame.gbuffer.ndc_depth[ys, xs].astype(np.float64)
    pixels = np.column_stack([xs + 0.5, ys + 0.5])
    return unproject_pixels(pixels, depth, viewport, frame.projection, frame.view, draw.world)[:, :3]


def _skinned_points(frame, draw_f, draw_g, xs, ys, viewport, seq):
    """Surface points of f's pixels, re-posed with g's bones. Same vertex order in both poses."""
    mesh = seq.mesh(draw_f.mesh_ref)
    triangles = mesh.triangles[frame.gbuffer.primitive_index[ys, xs].astype(np.int64)]
    posed_f = object_vertices(draw_f, seq)
    mvp = model_view_projection(frame.projection, frame.view, draw_f.world)
    xy, _, w = project_points(mvp, homogeneous(posed_f), viewport)
    pixels = np.column_stack([xs + 0.5, ys + 0.5])
    weights = invert_interpolation_batch(pixels, xy[triangles], w[triangles])
    posed_g = object_vertices(draw_g, seq)
    return np.einsum("nk,nkj->nj", weights, posed_g[triangles])


def dense_flow_pair(seq, f, g, mapping, tolerance=None):
    """
    Derives the flow from frame position f to frame position g.

    Args:
        seq (TraceSequence): Validated sequence.
        f (int): Source frame position.
        g (int): Target frame position.
        mapping (dict[int, int]): Draw of f -> draw of g (from tracking).
        tolerance (float): Depth slack before a target point counts as occluded.

    Returns:
        FlowField: f -> g displacement and status per pixel of f.
    """
    tolerance = settings.OCCLUSION_TOLERANCE if tolerance is None else tolerance
    frame_f, frame_g = seq.frames[f], seq.frames[g]
    vp = Viewport.of(seq)
    flow = FlowField.background(vp.width, vp.height)
    du, dv, status = flow.du, flow.dv, flow.status
    gb = frame_f.gbuffer
    depth_g = frame_g.gbuffer.ndc_depth.astype(np.float64)

    for d in np.unique(gb.draw_index[gb.covered]):
        d = int(d)
        ys, xs = np.nonzero(gb.draw_index == d)
        if d not in mapping:
            status[ys, xs] = FlowStatus.UNTRACKED
            continue
        draw_f, draw_g = frame_f.draws[d], frame_g.draws[mapping[d]]
        try:
            if draw_f.is_skinned:
                if draw_g.mesh_ref != draw_f.mesh_ref:
                    status[ys, xs] = FlowStatus.UNTRACKED
                    continue
                points = _skinned_points(frame_f, draw_f, draw_g, xs, ys, vp, seq)
            else:
                points = _rigid_points(frame_f, draw_f, xs, ys, vp)
        except GroundTruthError as exc:
            LOGGER.warning(f"frame {frame_f.frame_index} draw {d}: {exc}; pixels left untracked")
            status[ys, xs] = FlowStatus.UNTRACKED
            continue

        mvp_g = model_view_projection(frame_g.projection, frame_g.view, draw_g.world)
        pixel_g, z_g, w_g = project_points(mvp_g, homogeneous(points), vp)
        defined = np.all(np.isfinite(pixel_g), axis=1)
        du[ys, xs] = np.where(defined, pixel_g[:, 0] - (xs + 0.5), 0.0)
        dv[ys, xs] = np.where(defined, pixel_g[:, 1] - (ys + 0.5), 0.0)

        inside = defined & (w_g > 0) & vp.contains(np.nan_to_num(pixel_g, nan=-1.0))
        code = np.full(len(xs), FlowStatus.OUT_OF_VIEW, dtype=np.uint8)
        code[~defined] = FlowStatus.UNTRACKED
        cx = np.floor(pixel_g[inside, 0]).astype(np.int64)
        cy = np.floor(pixel_g[inside, 1]).astype(np.int64)
        hidden = z_g[inside] > depth_g[cy, cx] + tolerance
        code[inside] = np.where(hidden, FlowStatus.OCCLUDED, FlowStatus.VALID)
        status[ys, xs] = code

    LOGGER.debug(f"flow {frame_f.frame_index} -> {frame_g.frame_index}: {flow.counts()}")
    return flow


def wide_baseline_flow(seq, tracks, f, h, tolerance=None):
    """Flow between any two frame positions, draws paired through their track ids."""
    return dense_flow_pair(seq, f, h, tracks.mapping(f, h), tolerance=tolerance)
