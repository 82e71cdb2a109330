from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.correspondence.geometry import unproject_pixel
from src.errors import DegenerateTriangle, DegenerateW
from src.rasterizer.camera import Viewport, project_vertex
from src.rasterizer.oracle import generate_scene
from src.rasterizer.raster import edge_function, invert_interpolation, object_vertices, rasterize_frame, \
    render_frame
from src.rasterizer.scene import static_pan
from src.trace_model.container import encode_trace
from src.trace_model.types import DrawCall, FrameRecord, GBuffer, Mesh, SemanticClass, TraceSequence, Visibility
from src.utils import translation

coordinate = st.floats(-50.0, 50.0, allow_nan=False)
point = st.tuples(coordinate, coordinate)

# Square of NDC half-size 0.9 on a 16x12 grid covers 14x10 pixel centres
SQUARE = [(-0.9, -0.9), (0.9, -0.9), (0.9, 0.9), (-0.9, 0.9)]
SQUARE_PIXELS = 140


def flat_sequence(mesh, worlds, size=(16, 12)):
    """Identity camera: object coordinates are NDC."""
    classes = [SemanticClass(0, "building", False, 0.5)]
    draws = [DrawCall(mesh_ref=0, world=w, segment_id=0, class_id=0) for w in worlds]
    frame = FrameRecord(0, np.eye(4), np.eye(4), draws, GBuffer.empty(*size))
    return TraceSequence(classes, [mesh], [], [frame], size), frame


def fan(centre):
    positions = [(x, y, 0.0) for x, y in [centre] + SQUARE]
    return Mesh(0, positions, [[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]])


@given(point, point, point)
def test_edge_function_is_antisymmetric(a, b, p):
    assert edge_function(a, b, p) == -edge_function(b, a, p)


def test_quad_covers_each_pixel_once():
    mesh = Mesh(0, [(x, y, 0.0) for x, y in SQUARE], [[0, 1, 2], [0, 2, 3]])
    seq, frame = flat_sequence(mesh, [np.eye(4)])
    result = render_frame(frame, seq)
    assert result.gbuffer.covered.sum() == SQUARE_PIXELS
    assert result.fragments[0] == SQUARE_PIXELS
    assert set(np.unique(result.gbuffer.primitive_index[result.gbuffer.covered])) == {0, 1}
    np.testing.assert_allclose(result.gbuffer.ndc_depth[result.gbuffer.covered], 0.5)


@given(st.tuples(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3)))
def test_shared_edges_have_no_gaps_or_overlaps(centre):
    seq, frame = flat_sequence(fan(centre), [np.eye(4)])
    result = render_frame(frame, seq)
    assert result.gbuffer.covered.sum() == SQUARE_PIXELS
    assert result.fragments[0] == SQUARE_PIXELS


def test_visibility_classes():
    mesh = Mesh(0, [(x, y, 0.0) for x, y in SQUARE], [[0, 1, 2], [0, 2, 3]])
    worlds = [np.eye(4), translation((10.0, 0.0, 0.0)), translation((0.0, 0.0, 0.5))]
    seq, frame = flat_sequence(mesh, worlds)
    result = render_frame(frame, seq)
    assert result.visibility() == [Visibility.RENDERED, Visibility.CULLED, Visibility.DEPTH_FAILED]
    assert list(result.coverage()) == [SQUARE_PIXELS, 0, 0]


def test_nearer_draw_wins_regardless_of_order():
    mesh = Mesh(0, [(x, y, 0.0) for x, y in SQUARE], [[0, 1, 2], [0, 2, 3]])
    seq, frame = flat_sequence(mesh, [translation((0.0, 0.0, 0.5)), np.eye(4)])
    result = render_frame(frame, seq)
    assert set(np.unique(result.gbuffer.draw_index[result.gbuffer.covered])) == {1}
    assert result.visibility()[0] == Visibility.DEPTH_FAILED


@given(st.tuples(st.floats(-1.0, 1.0), st.floats(0.0, 2.5), st.floats(-1.0, 1.0)))
def test_project_then_unproject_round_trips(static_pan_scene, offset):
    seq, _ = static_pan_scene
    frame = seq.frames[0]
    draw = frame.draws[0]
    vp = Viewport.of(seq)
    x = np.array([*offset, 1.0])
    pixel, depth, _ = project_vertex(x, draw.world, frame.view, frame.projection, vp)
    back = unproject_pixel(pixel, depth, vp, frame.projection, frame.view, draw.world)
    np.testing.assert_allclose(back, x, atol=1e-5)


def test_project_vertex_rejects_vanishing_w():
    projection = np.zeros((4, 4))
    with pytest.raises(DegenerateW):
        project_vertex([0, 0, 0, 1], np.eye(4), np.eye(4), projection, Viewport(4, 4))


def test_inversion_at_a_vertex():
    triangle = [(1.0, 1.0), (9.0, 2.0), (3.0, 8.0)]
    bary = invert_interpolation(triangle[0], triangle, (2.0, 5.0, 0.5))
    np.testing.assert_allclose(bary, (1.0, 0.0, 0.0), atol=1e-12)
    assert bary.inside


def test_inversion_of_degenerate_triangle():
    with pytest.raises(DegenerateTriangle):
        invert_interpolation((1.0, 1.0), [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], (1.0, 1.0, 1.0))


def test_inversion_reproduces_raster_barycentrics(static_pan_scene):
    seq, truth = static_pan_scene
    frame, raster = seq.frames[2], truth.rasters[2]
    vp = Viewport.of(seq)
    ys, xs = np.nonzero(frame.gbuffer.covered)
    for y, x in list(zip(ys, xs))[::97]:
        draw = frame.draws[frame.gbuffer.draw_index[y, x]]
        tri = seq.mesh(draw.mesh_ref).triangles[frame.gbuffer.primitive_index[y, x]]
        points = object_vertices(draw, seq)[tri]
        projected = [project_vertex([*p, 1.0], draw.world, frame.view, frame.projection, vp) for p in points]
        bary = invert_interpolation((x + 0.5, y + 0.5), [p[0] for p in projected], [p[2] for p in projected])
        np.testing.assert_allclose(bary, raster.barycentrics[y, x], atol=1e-9)


def test_generation_is_deterministic():
    script = replace(static_pan(), resolution=(40, 24), frames=2)
    first, _ = generate_scene(script)
    second, _ = generate_scene(script)
    assert encode_trace(first) == encode_trace(second)


def test_rerendering_reproduces_the_recorded_gbuffer(static_pan_scene):
    seq, _ = static_pan_scene
    frame = seq.frames[1]
    gbuffer = rasterize_frame(frame, seq)
    np.testing.assert_array_equal(gbuffer.draw_index, frame.gbuffer.draw_index)
    np.testing.assert_array_equal(gbuffer.primitive_index, frame.gbuffer.primitive_index)
    np.testing.assert_array_equal(gbuffer.ndc_depth, frame.gbuffer.ndc_depth)


def test_recorded_visibility_matches_gbuffer(city_scene):
    seq, _ = city_scene
    for frame in seq.frames:
        present = set(np.unique(frame.gbuffer.draw_index[frame.gbuffer.covered]).tolist())
        for d, draw in enumerate(frame.draws):
            assert (draw.visibility == Visibility.RENDERED) == (d in present)


def test_oracle_flow_covers_every_consecutive_pair(static_pan_scene):
    seq, truth = static_pan_scene
    assert sorted(truth.flow) == [(k, k + 1) for k in range(len(seq.frames) - 1)]
    assert len(truth.poses) == len(seq.frames)


@pytest.mark.parametrize("threads", [2, 3, 7])
def test_banded_rendering_matches_a_single_thread(city_scene, threads):
    seq, _ = city_scene
    for k in (0, len(seq.frames) // 2, len(seq.frames) - 1):
        frame = seq.frames[k]
        single = render_frame(frame, seq, threads=1)
        banded = render_frame(frame, seq, threads=threads)
        for plane in ("draw_index", "primitive_index", "ndc_depth", "alpha"):
            np.testing.assert_array_equal(getattr(banded.gbuffer, plane), getattr(single.gbuffer, plane))
        np.testing.assert_array_equal(banded.depth, single.depth)
        np.testing.assert_array_equal(banded.barycentrics, single.barycentrics)
        np.testing.assert_array_equal(banded.fragments, single.fragments)


def test_generated_trace_does_not_depend_on_threads():
    script = replace(static_pan(), resolution=(40, 23))
    one, _ = generate_scene(script, threads=1)
    four, _ = generate_scene(script, threads=4)
    assert encode_trace(one) == encode_trace(four)
