from dataclasses import replace
from itertools import product

import numpy as np
import pytest
from scipy.ndimage import map_coordinates

from src.correspondence.field import FlowField, FlowStatus
from src.correspondence.flow import dense_flow_pair, wide_baseline_flow
from src.correspondence.flow_io import flow_to_color, instance_colors, read_flo, read_flow, status_path, \
    write_flow
from src.correspondence.geometry import invert_nonrigid, unproject_pixel, unproject_pixels
from src.correspondence.poses import camera_pose, relative_pose
from src.errors import InputError, NotSkinned, SingularView
from src.rasterizer.camera import Viewport
from src.rasterizer.oracle import generate_scene, oracle_flow
from src.rasterizer.scene import city_block
from src.tracking.tracker import track_sequence


def endpoint_errors(flow, expected):
    """EPE on the pixels both fields call valid."""
    both = flow.valid & expected.valid
    return np.hypot(flow.du - expected.du, flow.dv - expected.dv)[both]


def test_poses_match_script(static_pan_scene):
    seq, truth = static_pan_scene
    for k, frame in enumerate(seq.frames):
        pose = camera_pose(frame)
        np.testing.assert_allclose(pose.matrix, truth.poses[k], atol=1e-5)
        np.testing.assert_allclose(pose.matrix @ frame.view.astype(np.float64), np.eye(4), atol=1e-5)
        np.testing.assert_allclose(pose.rotation.T @ pose.rotation, np.eye(3), atol=1e-9)
        assert pose.kitti_row().shape == (12,)


def test_relative_pose_of_the_pan(static_pan_scene):
    seq, _ = static_pan_scene
    np.testing.assert_allclose(relative_pose(seq.frames[2], seq.frames[2]), np.eye(4), atol=1e-9)
    step = relative_pose(seq.frames[0], seq.frames[1])
    np.testing.assert_allclose(step[:3, 3], [0.1, 0.0, 0.0], atol=1e-5)


def test_singular_view_has_no_pose(static_pan_scene):
    seq, _ = static_pan_scene
    frame = seq.frames[0]
    broken = type(frame)(frame.frame_index, np.zeros((4, 4)), frame.projection, frame.draws, frame.gbuffer)
    with pytest.raises(SingularView):
        camera_pose(broken)


def test_still_camera_gives_zero_flow(still_scene):
    seq, _ = still_scene
    tracks = track_sequence(seq)
    flow = dense_flow_pair(seq, 0, 1, tracks.mapping(0, 1))
    covered = seq.frames[0].gbuffer.covered
    assert np.all(flow.status[covered] == FlowStatus.VALID)
    assert np.all(flow.status[~covered] == FlowStatus.BACKGROUND)
    assert np.abs(flow.du).max() < 1e-4 and np.abs(flow.dv).max() < 1e-4


def test_rigid_flow_matches_oracle(static_pan_scene):
    seq, truth = static_pan_scene
    tracks = track_sequence(seq)
    for f in range(len(seq.frames) - 1):
        flow = dense_flow_pair(seq, f, f + 1, tracks.mapping(f, f + 1))
        expected = truth.flow[(f, f + 1)]
        assert endpoint_errors(flow, expected).max() <= 1e-3
        assert np.mean(flow.status == expected.status) >= 0.99
        # camera moves right, the scene moves left
        assert np.all(flow.du[flow.valid] < 0)


def test_skinned_flow_matches_oracle(strip_scene):
    seq, truth = strip_scene
    tracks = track_sequence(seq)
    for f in range(len(seq.frames) - 1):
        flow = dense_flow_pair(seq, f, f + 1, tracks.mapping(f, f + 1))
        expected = truth.flow[(f, f + 1)]
        errors = endpoint_errors(flow, expected)
        assert errors.size
        assert np.mean(errors <= 1e-2) >= 0.995


def test_wide_baseline_flow(static_pan_scene):
    seq, truth = static_pan_scene
    tracks = track_sequence(seq)
    same = wide_baseline_flow(seq, tracks, 3, 3)
    covered = seq.frames[3].gbuffer.covered
    assert np.all(same.status[covered] == FlowStatus.VALID)
    assert np.abs(same.du).max() < 1e-4
    far = wide_baseline_flow(seq, tracks, 0, 2)
    expected = oracle_flow(seq, truth, 0, 2)
    assert endpoint_errors(far, expected).max() <= 1e-3
    assert np.mean(far.status == expected.status) >= 0.99


def test_untracked_draws(static_pan_scene):
    seq, _ = static_pan_scene
    flow = dense_flow_pair(seq, 0, 1, {})
    covered = seq.frames[0].gbuffer.covered
    assert np.all(flow.status[covered] == FlowStatus.UNTRACKED)
    assert flow.counts()["valid"] == 0


def test_nonrigid_inversion_at_rest_matches_unprojection(strip_scene):
    seq, _ = strip_scene
    frame = seq.frames[0]
    vp = Viewport.of(seq)
    strip = next(d for d, draw in enumerate(frame.draws) if draw.is_skinned)
    ys, xs = np.nonzero(frame.gbuffer.draw_index == strip)
    assert len(xs)
    for y, x in list(zip(ys, xs))[::11]:
        pixel = (x + 0.5, y + 0.5)
        point = invert_nonrigid(pixel, frame, strip, seq)
        assert point.barycentrics.inside
        np.testing.assert_allclose(point.posed_point, point.rest_point, atol=1e-5)
        rigid = unproject_pixel(pixel, frame.gbuffer.ndc_depth[y, x], vp, frame.projection, frame.view,
                                frame.draws[strip].world)
        np.testing.assert_allclose(point.posed_point, rigid[:3], atol=1e-4)


def test_nonrigid_inversion_rejects_rigid_and_uncovered(strip_scene):
    seq, _ = strip_scene
    frame = seq.frames[0]
    wall = next(d for d, draw in enumerate(frame.draws) if not draw.is_skinned)
    with pytest.raises(NotSkinned):
        invert_nonrigid((0.5, 0.5), frame, wall, seq)
    strip = next(d for d, draw in enumerate(frame.draws) if draw.is_skinned)
    ys, xs = np.nonzero(frame.gbuffer.draw_index != strip)
    with pytest.raises(InputError):
        invert_nonrigid((xs[0] + 0.5, ys[0] + 0.5), frame, strip, seq)


def test_flow_files_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    flow = FlowField(rng.normal(size=(5, 7)), rng.normal(size=(5, 7)), rng.integers(0, 5, size=(5, 7)))
    path = tmp_path / "000000_000001.flo"
    write_flow(path, flow)
    assert status_path(path).name == "000000_000001.status.png"
    again = read_flow(path)
    np.testing.assert_array_equal(again.du, flow.du)
    np.testing.assert_array_equal(again.dv, flow.dv)
    np.testing.assert_array_equal(again.status, flow.status)
    assert path.read_bytes()[:4] == np.array([202021.25], dtype="<f4").tobytes()


def test_malformed_flo_files(tmp_path):
    bad = tmp_path / "bad.flo"
    bad.write_bytes(np.array([1.0, 2.0, 3.0], dtype="<f4").tobytes())
    with pytest.raises(InputError):
        read_flo(bad)
    short = tmp_path / "short.flo"
    short.write_bytes(np.array([202021.25], dtype="<f4").tobytes() + np.array([4, 4], dtype="<i4").tobytes())
    with pytest.raises(InputError):
        read_flo(short)
    with pytest.raises(InputError):
        read_flo(tmp_path / "absent.flo")


def test_colour_codings():
    flow = FlowField(np.ones((2, 3)), np.zeros((2, 3)), np.array([[0, 0, 1], [0, 4, 0]]))
    image = flow_to_color(flow)
    assert image.shape == (2, 3, 3)
    assert not image[0, 2].any() and image[0, 0].any()
    labels = np.array([[0, 1], [2, 1]], dtype=np.uint16)
    colours = instance_colors(labels)
    assert not colours[0, 0].any()
    np.testing.assert_array_equal(colours[0, 1], colours[1, 1])
    assert not np.array_equal(colours[0, 1], colours[1, 0])


def test_pan_flow_is_pure_parallax(static_pan_scene):
    seq, _ = static_pan_scene
    tracks = track_sequence(seq)
    frame = seq.frames[0]
    vp = Viewport.of(seq)
    flow = dense_flow_pair(seq, 0, 1, tracks.mapping(0, 1))
    ys, xs = np.nonzero(flow.valid)
    pixels = np.column_stack([xs + 0.5, ys + 0.5])
    points = unproject_pixels(pixels, frame.gbuffer.ndc_depth[ys, xs], vp, frame.projection, frame.view, np.eye(4))
    depth = -(points @ frame.view.astype(np.float64).T)[:, 2]
    focal = frame.projection[1, 1] * vp.height / 2.0
    # the camera slides 0.1 along x without turning
    np.testing.assert_allclose(flow.du[ys, xs], -focal * 0.1 / depth, atol=1e-3)
    np.testing.assert_allclose(flow.dv[ys, xs], 0.0, atol=1e-3)


def test_flow_composes_across_frames(static_pan_scene):
    seq, _ = static_pan_scene
    tracks = track_sequence(seq)
    first = wide_baseline_flow(seq, tracks, 1, 2)
    second = wide_baseline_flow(seq, tracks, 2, 3)
    direct = wide_baseline_flow(seq, tracks, 1, 3)
    ys, xs = np.nonzero(first.valid & direct.valid)
    tx, ty = xs + first.du[ys, xs], ys + first.dv[ys, xs]
    x0, y0 = np.floor(tx).astype(int), np.floor(ty).astype(int)
    inside = (x0 >= 0) & (y0 >= 0) & (x0 + 1 < first.width) & (y0 + 1 < first.height)
    ys, xs, tx, ty, x0, y0 = (a[inside] for a in (ys, xs, tx, ty, x0, y0))

    mapping = tracks.mapping(1, 2)
    landed_on = np.array([mapping.get(int(d), -1) for d in seq.frames[1].gbuffer.draw_index[ys, xs]])
    target = seq.frames[2].gbuffer.draw_index
    same_surface = np.ones(len(xs), dtype=bool)
    for dy, dx in product((0, 1), (0, 1)):
        same_surface &= second.valid[y0 + dy, x0 + dx] & (target[y0 + dy, x0 + dx] == landed_on)
    assert np.count_nonzero(same_surface) > len(xs) // 2

    # bilinear sampling; pixel centres sit on integer coordinates of the arrays
    du = first.du[ys, xs] + map_coordinates(second.du.astype(np.float64), [ty, tx], order=1)
    dv = first.dv[ys, xs] + map_coordinates(second.dv.astype(np.float64), [ty, tx], order=1)
    errors = np.hypot(du - direct.du[ys, xs], dv - direct.dv[ys, xs])[same_surface]
    assert np.mean(errors <= 1e-2) >= 0.99


@pytest.fixture(scope="module")
def wide_city_scene():
    return generate_scene(replace(city_block(), resolution=(320, 180)), threads=4)


def test_rigid_city_flow_matches_oracle_at_full_resolution(wide_city_scene):
    seq, truth = wide_city_scene
    tracks = track_sequence(seq)
    for f in (0, 6, 7, 15, len(seq.frames) - 2):
        flow = dense_flow_pair(seq, f, f + 1, tracks.mapping(f, f + 1))
        expected = truth.flow[(f, f + 1)]
        gb = seq.frames[f].gbuffer
        skinned = np.array([draw.is_skinned for draw in seq.frames[f].draws])
        rigid = gb.covered.copy()
        rigid[gb.covered] = ~skinned[gb.draw_index[gb.covered]]
        both = rigid & flow.valid & expected.valid
        errors = np.hypot(flow.du - expected.du, flow.dv - expected.dv)[both]
        assert errors.size > 0.5 * np.count_nonzero(rigid)
        assert np.mean(errors <= 1e-3) >= 0.999
        assert np.mean(flow.status[rigid] == expected.status[rigid]) >= 0.99
