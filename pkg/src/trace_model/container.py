"""
Binary trace container.

    file   := MAGIC (4 bytes) | u32 version | chunk*
    chunk  := tag (4 bytes) | u64 payload length | payload | u32 CRC-32(payload)

Chunks appear in the order SEQH, CLSS, MESH*, SHDR*, FRAM*. Everything is
little-endian; reals are float32 and matrices row-major.
"""
import struct
import zlib

import numpy as np

from src.errors import (BadMagic, CorruptChunk, DanglingRef, InvalidSequence, IoFailure, ShaderSyntaxError,
                        VersionMismatch)
from src.settings import LOGGER
from src.shader_ir.program import format_program, parse_program
from src.trace_model import (MAGIC, RIGID, TAG_CLASSES, TAG_FRAME, TAG_HEADER, TAG_MESH, TAG_SHADER,
                             VERSION)
from src.trace_model.types import (DrawCall, FrameRecord, GBuffer, Mesh, SemanticClass, TraceSequence,
                                   Visibility)
from src.trace_model.validation import validate_trace

NO_SHADER = -1
_CHUNK_HEAD = struct.Struct("<4sQ")
_CRC = struct.Struct("<I")


# Encoding
def _f32(array):
    return np.ascontiguousarray(array, dtype="<f4").tobytes()


def _u32(array):
    return np.ascontiguousarray(array, dtype="<u4").tobytes()


def _string(text):
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _encode_classes(class_table):
    parts = [struct.pack("<I", len(class_table))]
    for cls in class_table:
        parts.append(struct.pack("<i", cls.class_id))
        parts.append(_string(cls.name))
        parts.append(struct.pack("<Bf", int(cls.is_dynamic), cls.max_speed))
    return b"".join(parts)


def _encode_mesh(mesh):
    slots = mesh.skin_indices.shape[1] if mesh.is_skinned else 0
    parts = [struct.pack("<iIIBI", mesh.mesh_id, mesh.vertex_count, len(mesh.triangles), int(mesh.is_skinned), slots),
             _f32(mesh.positions), _u32(mesh.triangles)]
    if mesh.is_skinned:
        parts += [_u32(mesh.skin_indices), _f32(mesh.skin_weights)]
    return b"".join(parts)


def _encode_shader(program):
    return struct.pack("<i", program.shader_id) + _string(format_program(program))


def _encode_draw(draw):
    pixel_ref = NO_SHADER if draw.pixel_shader_ref is None else draw.pixel_shader_ref
    bones = draw.bones if draw.bones is not None else np.zeros((0, 4, 4), dtype=np.float32)
    return b"".join([
        struct.pack("<i", draw.mesh_ref), _f32(draw.world),
        struct.pack("<iiiiBI", draw.segment_id, draw.class_id, draw.shader_ref, pixel_ref,
                    int(draw.visibility), len(bones)),
        _f32(bones),
    ])


def _encode_frame(frame):
    gb = frame.gbuffer
    parts = [struct.pack("<i", frame.frame_index), _f32(frame.view), _f32(frame.projection),
             struct.pack("<I", len(frame.draws))]
    parts.extend(_encode_draw(draw) for draw in frame.draws)
    parts += [struct.pack("<II", gb.width, gb.height), _u32(gb.draw_index), _u32(gb.primitive_index),
              _f32(gb.ndc_depth), _f32(gb.alpha)]
    return b"".join(parts)


def _chunk(tag, payload):
    return _CHUNK_HEAD.pack(tag, len(payload)) + payload + _CRC.pack(zlib.crc32(payload))


def encode_trace(seq):
    """Serialises a sequence to container bytes (no validation)."""
    parts = [MAGIC, struct.pack("<I", VERSION),
             _chunk(TAG_HEADER, struct.pack("<II", *seq.resolution)),
             _chunk(TAG_CLASSES, _encode_classes(seq.class_table))]
    parts.extend(_chunk(TAG_MESH, _encode_mesh(mesh)) for mesh in seq.meshes)
    parts.extend(_chunk(TAG_SHADER, _encode_shader(program)) for program in seq.shaders)
    parts.extend(_chunk(TAG_FRAME, _encode_frame(frame)) for frame in seq.frames)
    return b"".join(parts)


def write_trace(seq, path):
    """
    Validates and writes a trace sequence.

    Args:
        seq (TraceSequence): Sequence to write.
        path (str | Path): Destination file.

    Raises:
        InvalidSequence: The sequence violates an invariant (the first one is reported).
        IoFailure: The file cannot be written.
    """
    violations = validate_trace(seq)
    if violations:
        raise InvalidSequence(violations[0])
    data = encode_trace(seq)
    try:
        with open(path, "wb") as handle:
            handle.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write trace {path}: {exc}") from exc
    LOGGER.info(f"Wrote {len(seq.frames)} frame(s) to {path} ({len(data)} bytes)")


# Decoding
class _Cursor:
    """Reads little-endian fields from a chunk payload, tracking file offsets."""

    def __init__(self, data, start, end):
        self.data = data
        self.pos = start
        self.end = end

    def _take(self, size):
        if self.pos + size > self.end:
            raise CorruptChunk("payload ends early", self.pos)
        start = self.pos
        self.pos += size
        return start

    def unpack(self, fmt):
        layout = struct.Struct("<" + fmt)
        start = self._take(layout.size)
        values = layout.unpack_from(self.data, start)
        return values if len(values) > 1 else values[0]

    def array(self, dtype, count, shape):
        itemsize = np.dtype(dtype).itemsize
        start = self._take(itemsize * count)
        values = np.frombuffer(self.data, dtype=dtype, count=count, offset=start)
        return values.astype(np.dtype(dtype).newbyteorder("="), copy=True).reshape(shape)

    def string(self):
        length = self.unpack("I")
        start = self._take(length)
        try:
            return self.data[start:start + length].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptChunk("string is not valid UTF-8", start) from exc

    def finish(self):
        if self.pos != self.end:
            raise CorruptChunk(f"{self.end - self.pos} trailing byte(s) in payload", self.pos)


def _decode_classes(cur):
    classes = []
    for _ in range(cur.unpack("I")):
        class_id = cur.unpack("i")
        name = cur.string()
        is_dynamic, max_speed = cur.unpack("Bf")
        classes.append(SemanticClass(class_id, name, bool(is_dynamic), float(max_speed)))
    return classes


def _decode_mesh(cur):
    mesh_id, n_vertices, n_triangles, skinned, slots = cur.unpack("iIIBI")
    positions = cur.array("<f4", n_vertices * 3, (n_vertices, 3))
    triangles = cur.array("<u4", n_triangles * 3, (n_triangles, 3))
    skin_indices = skin_weights = None
    if skinned:
        skin_indices = cur.array("<u4", n_vertices * slots, (n_vertices, slots))
        skin_weights = cur.array("<f4", n_vertices * slots, (n_vertices, slots))
    return Mesh(mesh_id, positions, triangles, skin_indices, skin_weights)


def _decode_shader(cur, payload_start):
    shader_id = cur.unpack("i")
    text = cur.string()
    try:
        return parse_program(text, shader_id=shader_id)
    except ShaderSyntaxError as exc:
        raise CorruptChunk(f"shader {shader_id} does not parse: {exc}", payload_start) from exc


def _decode_draw(cur, refs):
    offset = cur.pos
    mesh_ref = cur.unpack("i")
    world = cur.array("<f4", 16, (4, 4))
    segment_id, class_id, shader_ref, pixel_ref, visibility, n_bones = cur.unpack("iiiiBI")
    bones = cur.array("<f4", n_bones * 16, (n_bones, 4, 4)) if n_bones else None
    if mesh_ref not in refs["meshes"]:
        raise DanglingRef(f"draw references unknown mesh {mesh_ref}", offset)
    if class_id not in refs["classes"]:
        raise DanglingRef(f"draw references unknown class {class_id}", offset)
    for ref in (shader_ref, pixel_ref):
        if ref != RIGID and ref not in refs["shaders"]:
            raise DanglingRef(f"draw references unknown shader {ref}", offset)
    try:
        visibility = Visibility(visibility)
    except ValueError as exc:
        raise CorruptChunk(f"unknown visibility code {visibility}", offset) from exc
    return DrawCall(mesh_ref=mesh_ref, world=world, segment_id=segment_id, class_id=class_id,
                    shader_ref=shader_ref, bones=bones, visibility=visibility,
                    pixel_shader_ref=None if pixel_ref == NO_SHADER else pixel_ref)


def _decode_frame(cur, refs):
    frame_index = cur.unpack("i")
    view = cur.array("<f4", 16, (4, 4))
    projection = cur.array("<f4", 16, (4, 4))
    draws = [_decode_draw(cur, refs) for _ in range(cur.unpack("I"))]
    width, height = cur.unpack("II")
    count = width * height
    gbuffer = GBuffer(
        draw_index=cur.array("<u4", count, (height, width)),
        primitive_index=cur.array("<u4", count, (height, width)),
        ndc_depth=cur.array("<f4", count, (height, width)),
        alpha=cur.array("<f4", count, (height, width)),
    )
    return FrameRecord(frame_index, view, projection, draws, gbuffer)


def _chunks(data):
    """Yields (tag, chunk offset, payload start, payload end), checking lengths and CRCs."""
    pos = len(MAGIC) + 4
    while pos < len(data):
        if pos + _CHUNK_HEAD.size > len(data):
            raise CorruptChunk("truncated chunk header", pos)
        tag, length = _CHUNK_HEAD.unpack_from(data, pos)
        start = pos + _CHUNK_HEAD.size
        end = start + length
        if end + _CRC.size > len(data):
            raise CorruptChunk(f"chunk {tag!r} claims {length} bytes past the end of the file", pos)
        (crc,) = _CRC.unpack_from(data, end)
        if crc != zlib.crc32(data[start:end]):
            raise CorruptChunk(f"checksum mismatch in chunk {tag!r}", pos)
        yield tag, pos, start, end
        pos = end + _CRC.size


# Tag -> tags allowed to follow it
_NEXT = {
    None: {TAG_HEADER},
    TAG_HEADER: {TAG_CLASSES},
    TAG_CLASSES: {TAG_MESH, TAG_SHADER, TAG_FRAME},
    TAG_MESH: {TAG_MESH, TAG_SHADER, TAG_FRAME},
    TAG_SHADER: {TAG_SHADER, TAG_FRAME},
    TAG_FRAME: {TAG_FRAME},
}


def decode_trace(data):
    """
    Decodes container bytes into a TraceSequence.

    Raises:
        BadMagic, VersionMismatch, CorruptChunk, DanglingRef: With the byte offset of the problem.
        InvalidSequence: The decoded sequence violates an invariant.
    """
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise BadMagic(f"not a trace file (expected {MAGIC!r})", 0)
    if len(data) < len(MAGIC) + 4:
        raise CorruptChunk("missing version field", len(MAGIC))
    (version,) = struct.unpack_from("<I", data, len(MAGIC))
    if version != VERSION:
        raise VersionMismatch(f"container version {version}, expected {VERSION}", len(MAGIC))

    resolution, classes, meshes, shaders, frames = None, [], [], [], []
    refs = {"meshes": set(), "classes": set(), "shaders": set()}
    previous = None
    for tag, offset, start, end in _chunks(data):
        if tag not in _NEXT.get(previous, set()):
            raise CorruptChunk(f"unexpected chunk {tag!r} after {previous!r}", offset)
        previous = tag
        cur = _Cursor(data, start, end)
        if tag == TAG_HEADER:
            resolution = tuple(int(v) for v in cur.unpack("II"))
        elif tag == TAG_CLASSES:
            classes = _decode_classes(cur)
            refs["classes"] = {c.class_id for c in classes}
        elif tag == TAG_MESH:
            meshes.append(_decode_mesh(cur))
            refs["meshes"].add(meshes[-1].mesh_id)
        elif tag == TAG_SHADER:
            shaders.append(_decode_shader(cur, start))
            refs["shaders"].add(shaders[-1].shader_id)
        else:
            frames.append(_decode_frame(cur, refs))
        cur.finish()
    if previous not in (TAG_CLASSES, TAG_MESH, TAG_SHADER, TAG_FRAME):
        raise CorruptChunk("file ends before the class table", len(data))

    seq = TraceSequence(class_table=classes, meshes=meshes, shaders=shaders, frames=frames,
                        resolution=resolution)
    violations = validate_trace(seq)
    if violations:
        raise InvalidSequence(violations[0])
    return seq


def load_trace(path):
    """
    Loads and validates a trace file.

    Args:
        path (str | Path): Trace file written by `write_trace`.

    Returns:
        TraceSequence: Fully validated sequence.

    Raises:
        IoFailure: The file cannot be read.
        BadMagic, VersionMismatch, CorruptChunk, DanglingRef: Malformed container (with byte offset).
    """
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise IoFailure(f"cannot read trace {path}: {exc}") from exc
    seq = decode_trace(data)
    LOGGER.info(f"Loaded {len(seq.frames)} frame(s), {len(seq.meshes)} mesh(es) from {path}")
    return seq
