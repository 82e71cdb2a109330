import struct
from dataclasses import replace

import numpy as np
import pytest

from src.errors import BadMagic, CorruptChunk, DanglingRef, InvalidSequence, IoFailure, VersionMismatch
from src.trace_model import BACKGROUND
from src.trace_model.container import decode_trace, encode_trace, load_trace, write_trace
from src.trace_model.types import DrawCall, FrameRecord, GBuffer, Mesh, SemanticClass, TraceSequence
from src.trace_model.validation import validate_trace

CLASSES = [SemanticClass(0, "building", False, 0.5), SemanticClass(2, "car", True, 3.0)]


def tiny_sequence(**draw_overrides):
    mesh = Mesh(0, [[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    draw = DrawCall(**{"mesh_ref": 0, "world": np.eye(4), "segment_id": 0, "class_id": 2, **draw_overrides})
    frame = FrameRecord(0, np.eye(4), np.eye(4), [draw], GBuffer.empty(4, 3))
    return TraceSequence(CLASSES, [mesh], [], [frame], (4, 3))


def codes(seq):
    return [v.code for v in validate_trace(seq)]


def test_round_trip_is_bit_identical(tmp_path, static_pan_scene):
    seq, _ = static_pan_scene
    path = tmp_path / "scene.vptr"
    write_trace(seq, path)
    loaded = load_trace(path)
    assert encode_trace(loaded) == path.read_bytes()
    assert loaded.resolution == seq.resolution
    assert [m.mesh_id for m in loaded.meshes] == [m.mesh_id for m in seq.meshes]
    for a, b in zip(loaded.frames, seq.frames):
        assert a.frame_index == b.frame_index
        np.testing.assert_array_equal(a.view, b.view)
        np.testing.assert_array_equal(a.gbuffer.draw_index, b.gbuffer.draw_index)
        np.testing.assert_array_equal(a.gbuffer.ndc_depth, b.gbuffer.ndc_depth)
        assert [d.visibility for d in a.draws] == [d.visibility for d in b.draws]


def test_empty_sequence_round_trips():
    seq = TraceSequence(CLASSES, [], [], [], (8, 6))
    loaded = decode_trace(encode_trace(seq))
    assert loaded.frames == [] and loaded.resolution == (8, 6)


def test_bad_magic_reports_offset_zero():
    with pytest.raises(BadMagic) as err:
        decode_trace(b"NOPE" + bytes(16))
    assert err.value.offset == 0


def test_version_mismatch(static_pan_scene):
    data = bytearray(encode_trace(static_pan_scene[0]))
    data[4:8] = struct.pack("<I", 99)
    with pytest.raises(VersionMismatch) as err:
        decode_trace(bytes(data))
    assert err.value.offset == 4


def test_truncated_file_is_a_corrupt_chunk():
    data = encode_trace(tiny_sequence())
    with pytest.raises(CorruptChunk):
        decode_trace(data[:-7])


def test_flipped_payload_byte_fails_checksum():
    data = bytearray(encode_trace(tiny_sequence()))
    data[-10] ^= 0xFF
    with pytest.raises(CorruptChunk):
        decode_trace(bytes(data))


def test_dangling_mesh_reference_reports_draw_offset():
    seq = tiny_sequence()
    seq.frames[0].draws[0].mesh_ref = 5
    with pytest.raises(DanglingRef) as err:
        decode_trace(encode_trace(seq))
    assert err.value.offset > 8


def test_missing_file_is_an_io_failure(tmp_path):
    with pytest.raises(IoFailure):
        load_trace(tmp_path / "missing.vptr")


def test_writer_refuses_invalid_sequences(tmp_path):
    seq = tiny_sequence(class_id=9)
    with pytest.raises(InvalidSequence) as err:
        write_trace(seq, tmp_path / "bad.vptr")
    assert err.value.violation.code == "dangling-class"
    assert not (tmp_path / "bad.vptr").exists()


def test_valid_sequence_has_no_violations(static_pan_scene, strip_scene):
    assert validate_trace(static_pan_scene[0]) == []
    assert validate_trace(strip_scene[0]) == []


def test_skin_weights_must_sum_to_one():
    seq = tiny_sequence()
    seq.meshes[0] = Mesh(0, seq.meshes[0].positions, seq.meshes[0].triangles,
                         [[0, 1]] * 3, [[0.5, 0.25]] * 3)
    assert codes(seq).count("skin-weight-sum") == 3


def test_skinned_draw_checks():
    seq = tiny_sequence(shader_ref=4)
    found = codes(seq)
    assert "dangling-shader" in found
    assert "missing-bones" in found
    assert "unskinned-mesh" in found


def test_frame_order_and_gbuffer_checks():
    seq = tiny_sequence()
    second = replace(seq.frames[0], frame_index=0)
    gb = second.gbuffer
    draw_index = gb.draw_index.copy()
    draw_index[0, 0] = 3
    primitive = gb.primitive_index.copy()
    primitive[2, 2] = 0
    second.gbuffer = GBuffer(draw_index, primitive, gb.ndc_depth, gb.alpha)
    seq.frames.append(second)
    found = codes(seq)
    assert "frame-order" in found
    assert "dangling-pixel-draw" in found
    assert "primitive-sentinel" in found


def test_singular_view_is_flagged():
    seq = tiny_sequence()
    seq.frames[0].view = np.zeros((4, 4), dtype=np.float32)
    assert "singular-view" in codes(seq)


def test_bottom_row_of_world():
    world = np.eye(4)
    world[3, 0] = 1.0
    assert "world-bottom-row" in codes(tiny_sequence(world=world))


def test_background_sentinel_value():
    assert GBuffer.empty(2, 2).draw_index[0, 0] == BACKGROUND == 0xFFFFFFFF
