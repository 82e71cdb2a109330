from functools import lru_cache
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.instances.clustering import cluster_instances
from src.rasterizer.scene import occlusion
from src.trace_model.types import SemanticClass
from src.tracking.association import Node, build_graph, solve_matching
from src.tracking.tracker import persistent_instance_ids, track_sequence

CLASSES = {
    0: SemanticClass(0, "building", False, 2.0),
    1: SemanticClass(1, "car", True, 3.0),
}


@st.composite
def node(draw):
    position = np.array(draw(st.tuples(*[st.integers(-2, 2)] * 3)), dtype=np.float64)
    return Node(position=position, class_id=draw(st.sampled_from([0, 1])), segment_id=draw(st.integers(0, 1)))


def reference_matching(graph):
    """Optimal weight by dynamic programming over used columns, and the smallest optimal pair list."""
    mask, weights = graph.admissible_mask(), graph.weight_matrix()
    n, m = mask.shape

    @lru_cache(maxsize=None)
    def best(i, used):
        if i == n:
            return 0.0
        value = best(i + 1, used)
        for j in range(m):
            if mask[i, j] and not used >> j & 1:
                value = max(value, weights[i, j] + best(i + 1, used | 1 << j))
        return value

    total = best(0, 0)
    tolerance = 1e-9 * max(1.0, total)
    pairs, used = [], 0
    for i in range(n):
        target = best(i, used)
        for j in range(m):
            if mask[i, j] and not used >> j & 1 and weights[i, j] + best(i + 1, used | 1 << j) >= target - tolerance:
                pairs.append((i, j))
                used |= 1 << j
                break
    return total, pairs


@settings(max_examples=10_000, deadline=None)
@given(st.lists(node(), max_size=8), st.lists(node(), max_size=8))
def test_matching_is_optimal_and_lexicographically_smallest(nodes_f, nodes_g):
    graph = build_graph(nodes_f, nodes_g, CLASSES)
    result = solve_matching(graph)
    pairs = [(e.i, e.j) for e in result]
    assert len({i for i, _ in pairs}) == len(pairs) == len({j for _, j in pairs})
    assert all(e.admissible for e in result)
    if not nodes_f or not nodes_g:
        assert result == []
        return
    best, smallest = reference_matching(graph)
    assert abs(sum(e.weight for e in result) - best) <= 1e-9 * max(1.0, best)
    assert pairs == smallest


def test_small_matchings_agree_with_enumeration():
    nodes_f = [Node(np.array(p, dtype=np.float64), 1, 0) for p in [(0, 0, 0), (1, 0, 0), (2, 0, 0)]]
    nodes_g = [Node(np.array(p, dtype=np.float64), 1, 0) for p in [(0.5, 0, 0), (1.5, 0, 0), (2.5, 0, 0)]]
    graph = build_graph(nodes_f, nodes_g, CLASSES)
    weights, mask = graph.weight_matrix(), graph.admissible_mask()
    totals = [sum(weights[i, j] for i, j in enumerate(perm) if mask[i, j]) for perm in permutations(range(3))]
    best, _ = reference_matching(graph)
    assert best == pytest.approx(max(totals))
    assert sum(e.weight for e in solve_matching(graph)) == pytest.approx(best)


def test_ties_go_to_the_smallest_pair():
    at = np.zeros(3)
    nodes = [Node(at, 1, 0), Node(at, 1, 0)]
    result = solve_matching(build_graph(nodes, nodes, CLASSES))
    assert [(e.i, e.j) for e in result] == [(0, 0), (1, 1)]


def test_admissibility_rules():
    origin, near, far = np.zeros(3), np.array([1.0, 0.0, 0.0]), np.array([2.5, 0.0, 0.0])
    graph = build_graph([Node(origin, 1, 0), Node(origin, 0, 0)],
                        [Node(near, 1, 0), Node(near, 1, 1), Node(far, 0, 5), Node(far, 1, 0)], CLASSES)
    mask = graph.admissible_mask()
    np.testing.assert_array_equal(mask, [[True, False, False, True], [False, False, False, False]])
    np.testing.assert_allclose(graph.weight_matrix()[0], [2.0, 0.0, 0.0, 0.5])
    moved = build_graph([Node(origin, 0, 0)], [Node(near, 0, 9)], CLASSES)
    assert moved.admissible_mask()[0, 0]


def test_speed_cap_is_strict():
    graph = build_graph([Node(np.zeros(3), 0, 0)], [Node(np.array([2.0, 0.0, 0.0]), 0, 0)], CLASSES)
    assert solve_matching(graph) == []


def test_tracks_follow_scripted_objects(city_scene):
    seq, truth = city_scene
    tracks = track_sequence(seq)
    for f in range(len(seq.frames) - 1):
        assert tracks.mapping(f, f + 1) == truth.pair_mapping(f, f + 1)


def test_lod_swap_keeps_the_track(lod_scene):
    seq, truth = lod_scene
    tracks = track_sequence(seq)
    assert seq.frames[2].draws[1].mesh_ref != seq.frames[3].draws[1].mesh_ref
    assert tracks.mapping(2, 3) == truth.pair_mapping(2, 3)


def test_occluded_car_is_bridged(occlusion_scene):
    seq, truth = occlusion_scene
    tracks = track_sequence(seq)
    assert len(seq.frames[5].draws) == 1
    assert tracks.mapping(3, 7) == truth.pair_mapping(3, 7)
    assert len(tracks.mapping(3, 7)) == len(seq.frames[3].draws)
    bridged = tracks.extrapolated(5)
    assert set(bridged) == set(tracks.frame_tracks[3][1:])
    assert all(entry.frames_missing == 2 for entry in bridged.values())


def test_extrapolated_position_is_linear(occlusion_scene):
    seq, _ = occlusion_scene
    tracks = track_sequence(seq)
    body = tracks.frame_tracks[3][1]
    entry = tracks.extrapolated(6)[body]
    np.testing.assert_allclose(entry.position, seq.frames[7].draws[1].position - [0.5, 0.0, 0.0], atol=1e-5)


def test_long_gap_retires_the_track(long_occlusion_scene):
    seq, truth = long_occlusion_scene
    tracks = track_sequence(seq)
    reappear = occlusion(12).frames - 3
    mapping = tracks.mapping(3, reappear)
    assert mapping == {0: 0}
    assert truth.pair_mapping(3, reappear) == {d: d for d in range(len(seq.frames[3].draws))}
    assert not tracks.extrapolated(14)
    assert min(tracks.frame_tracks[reappear][1:]) > max(tracks.frame_tracks[3])


def test_extrapolation_limit_is_configurable(long_occlusion_scene):
    seq, truth = long_occlusion_scene
    tracks = track_sequence(seq, max_extrapolation_frames=15)
    reappear = occlusion(12).frames - 3
    assert tracks.max_extrapolation_frames == 15
    assert tracks.mapping(3, reappear) == truth.pair_mapping(3, reappear)


def test_ids_start_at_one_and_are_never_reused(city_scene):
    seq, _ = city_scene
    tracks = track_sequence(seq)
    seen = [tid for ids in tracks.frame_tracks for tid in ids]
    assert sorted(set(seen)) == list(range(1, len(tracks.tracks) + 1))
    for ids in tracks.frame_tracks:
        assert len(set(ids)) == len(ids)
    for track in tracks.tracks:
        assert track.frames == list(range(track.frames[0], track.frames[-1] + 1))


def test_persistent_instance_ids(city_scene):
    seq, _ = city_scene
    tracks = track_sequence(seq)
    for k in (0, len(seq.frames) - 1):
        instance_map = cluster_instances(seq.frames[k])
        persistent = persistent_instance_ids(instance_map, tracks.frame_tracks[k])
        assert len(set(persistent.values())) == len(persistent)
    first = persistent_instance_ids(cluster_instances(seq.frames[0]), tracks.frame_tracks[0])
    last = persistent_instance_ids(cluster_instances(seq.frames[-1]), tracks.frame_tracks[-1])
    assert first[1] == last[1]
