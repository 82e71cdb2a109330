"""Mapping pixels back to object space, for rigid and for skinned draws."""
from dataclasses import dataclass

import numpy as np

from src.errors import DegenerateDepth, InputError, NotSkinned, SingularMatrix
from src.rasterizer.camera import Viewport, model_view_projection, project_points
from src.rasterizer.raster import Barycentrics, invert_interpolation
from src.shader_ir.skinning import skin_vertices
from src.utils import homogeneous

W_EPSILON = 1e-12


def _screen_from_object(viewport, projection, view, world):
    return viewport.clip_matrix @ model_view_projection(projection, view, world)


def _inverse(matrix):
    try:
        inverse = np.linalg.inv(matrix)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("C·P·V·W is not invertible") from exc
    if not np.all(np.isfinite(inverse)):
        raise SingularMatrix("C·P·V·W is not invertible")
    return inverse


def unproject_pixel(pixel, ndc_depth, viewport, projection, view, world):
    """
    Recovers the object-space point behind a pixel: x = (C·P·V·W)⁻¹ · (px, py, depth, 1).

    Args:
        pixel (array-like): Pixel coordinates (x, y).
        ndc_depth (float): Recorded depth in [0, 1].
        viewport (Viewport): Pixel grid (C).
        projection, view, world (np.ndarray): P, V, W.

    Returns:
        np.ndarray: Homogeneous object-space point with w = 1.

    Raises:
        SingularMatrix: The combined transform cannot be inverted.
        DegenerateDepth: The recovered w vanishes.
    """
    inverse = _inverse(_screen_from_object(viewport, projection, view, world))
    x = inverse @ np.array([pixel[0], pixel[1], ndc_depth, 1.0], dtype=np.float64)
    if abs(x[3]) < W_EPSILON:
        raise DegenerateDepth(f"depth {ndc_depth} at pixel {tuple(pixel)} unprojects to infinity")
    return x / x[3]


def unproject_pixels(pixels, ndc_depth, viewport, projection, view, world):
    """Vectorised `unproject_pixel`; rows whose w vanishes come back as NaN."""
    inverse = _inverse(_screen_from_object(viewport, projection, view, world))
    pixels = np.asarray(pixels, dtype=np.float64)
    screen = np.column_stack([pixels, np.asarray(ndc_depth, dtype=np.float64), np.ones(len(pixels))])
    x = screen @ inverse.T
    w = np.where(np.abs(x[:, 3]) < W_EPSILON, np.nan, x[:, 3])
    return x / w[:, None]


@dataclass(frozen=True, eq=False)
class SurfacePoint:
    triangle: int
    barycentrics: Barycentrics
    rest_point: np.ndarray  # on the rest mesh (object space)
    posed_point: np.ndarray  # on the skinned mesh of the frame (object space)


def invert_nonrigid(pixel, frame, draw_index, seq):
    """
    Maps a pixel of a skinned draw back onto its rest mesh.

    The draw's position slice is run on the three rest vertices of the
    primitive the G-buffer recorded at the pixel; inverting the rasterizer's
    interpolation on their projections gives barycentrics, which are then
    applied to the rest vertices.

    Args:
        pixel (array-like): Pixel coordinates (x, y).
        frame (FrameRecord): Frame holding the draw and its G-buffer.
        draw_index (int): Draw covering the pixel.
        seq (TraceSequence): Meshes and shaders.

    Returns:
        SurfacePoint: Triangle, barycentrics, rest-mesh point and posed point.

    Raises:
        NotSkinned: The draw has no vertex program.
        DegenerateTriangle: The primitive projects to a degenerate triangle.
    """
    draw = frame.draws[draw_index]
    if not draw.is_skinned:
        raise NotSkinned(f"draw {draw_index} of frame {frame.frame_index} is rigid")
    column, row = int(np.floor(pixel[0])), int(np.floor(pixel[1]))
    if frame.gbuffer.draw_index[row, column] != draw_index:
        raise InputError(f"pixel {tuple(pixel)} of frame {frame.frame_index} is not covered by draw {draw_index}")
    triangle = int(frame.gbuffer.primitive_index[row, column])
    mesh = seq.mesh(draw.mesh_ref)
    corners = mesh.triangles[triangle].astype(np.int64)
    posed = skin_vertices(seq.shader(draw.shader_ref), mesh.positions[corners], mesh.skin_indices[corners],
                          mesh.skin_weights[corners], draw.bones)
    mvp = model_view_projection(frame.projection, frame.view, draw.world)
    xy, _, w = project_points(mvp, homogeneous(posed), Viewport.of(seq))
    bary = invert_interpolation(pixel, xy, w)
    rest = mesh.positions[corners].astype(np.float64)
    return SurfacePoint(triangle=triangle, barycentrics=bary,
                        rest_point=bary.interpolate(rest), posed_point=bary.interpolate(posed))
