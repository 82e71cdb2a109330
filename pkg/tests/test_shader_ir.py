import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import InputError, NoFreeSlots, ShaderSyntaxError, UnboundRegister, UndeclaredRegister, UnknownOutput
from src.shader_ir import PIXEL, POSITION_OUTPUT, VERTEX
from src.shader_ir.interpreter import execute_program
from src.shader_ir.program import format_program, parse_program
from src.shader_ir.rewriting import MAX_TAG, gbuffer_slots, inject_gbuffer_writes
from src.shader_ir.skinning import skin_vertices, vertex_bindings
from src.shader_ir.slicing import slice_program

HEADER = "vs\nin v0:4\nin v1:4\nout o_pos:4\nout o_aux:4\nconst c0..c7:4\n"
REGISTERS = ["v0", "v1", "c0", "c3", "r0", "r1", "r2"]
DESTS = ["r0", "r1", "r2", "o_pos", "o_aux"]
MASKS = ["", ".x", ".y", ".xy", ".xz", ".yw", ".xyz", ".w"]
SWIZZLES = ["", ".x", ".wzyx", ".yyxx", ".zwxy"]

finite32 = st.floats(-100.0, 100.0, allow_nan=False, width=32)


@st.composite
def source(draw):
    if draw(st.integers(0, 5)) == 0:
        return f"l({draw(finite32)}, {draw(finite32)}, {draw(finite32)}, {draw(finite32)})"
    return draw(st.sampled_from(REGISTERS)) + draw(st.sampled_from(SWIZZLES))


@st.composite
def instruction(draw):
    dest = draw(st.sampled_from(DESTS)) + draw(st.sampled_from(MASKS))
    opcode = draw(st.sampled_from(["mov", "add", "sub", "mul", "mad", "min", "max", "dp4", "m44"]))
    if opcode == "m44":
        return f"m44 {dest}, {draw(source())}, c{draw(st.integers(0, 4))}"
    count = {"mov": 1, "mad": 3}.get(opcode, 2)
    return f"{opcode} {dest}, " + ", ".join(draw(source()) for _ in range(count))


@st.composite
def random_program(draw):
    body = draw(st.lists(instruction(), min_size=1, max_size=12))
    return parse_program(HEADER + "\n".join(body))


def bindings(values):
    """v0, v1 and c0..c7 from a (rows, 40) block of lanes."""
    lanes = np.asarray(values, dtype=np.float32).reshape(len(values), 10, 4)
    inputs = {"v0": lanes[:, 0], "v1": lanes[:, 1]}
    constants = {f"c{k}": lanes[:, 2 + k] for k in range(8)}
    return inputs, constants


def test_reference_listings_parse(skinning_program, surface_program):
    assert skinning_program.kind == VERTEX
    assert len(skinning_program.instructions) == 7
    assert surface_program.kind == PIXEL
    used = {d.name: d.used for d in surface_program.output_decls}
    assert used == {"o0": True, "o1": False, "o2": False, "o3": False}


def test_format_program_parses_back(skinning_program):
    again = parse_program(format_program(skinning_program), shader_id=1)
    assert again == skinning_program


def test_statements_separated_by_semicolons():
    program = parse_program("ps; in v0:4; out o0:4; mov o0, v0.zzzz // copy depth")
    assert len(program.instructions) == 1
    assert program.instructions[0].sources[0].swizzle == (2, 2, 2, 2)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(UndeclaredRegister) as err:
        parse_program("vs\nin v0:4\nout o_pos:4\nmov o_pos, v9")
    assert err.value.line == 4
    with pytest.raises(ShaderSyntaxError) as err:
        parse_program("vs\nin v0:4\nout o_pos:4\nfrob o_pos, v0")
    assert err.value.line == 4
    with pytest.raises(ShaderSyntaxError):
        parse_program("vs\nin v0:4\nout o_pos:4\nadd o_pos, v0")


def test_unbound_input_is_reported(skinning_program):
    with pytest.raises(UnboundRegister):
        execute_program(skinning_program, {"v0": [0, 0, 0, 1]}, {})


def test_skinning_slice_drops_texture_copy(skinning_program):
    result = slice_program(skinning_program, POSITION_OUTPUT)
    assert result.kept == (0, 1, 2, 3, 4, 5)
    with pytest.raises(UnknownOutput):
        slice_program(skinning_program, "o_missing")


@settings(max_examples=1000, deadline=None)
@given(random_program(), st.integers(0, 2**32 - 1))
def test_slice_matches_full_execution_bitwise(program, seed):
    rng = np.random.default_rng(seed)
    inputs, constants = bindings(rng.uniform(-100.0, 100.0, size=(100, 40)))
    full = execute_program(program, inputs, constants)[POSITION_OUTPUT]
    sliced = execute_program(slice_program(program, POSITION_OUTPUT).program, inputs, constants)[POSITION_OUTPUT]
    assert np.array_equal(full.view(np.uint32), sliced.view(np.uint32))


def test_identity_bones_leave_rest_pose(skinning_program):
    positions = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, -3.0], [0.25, 0.5, 0.75]], dtype=np.float32)
    indices = np.array([[0, 1]] * 3, dtype=np.uint32)
    weights = np.array([[1.0, 0.0], [0.5, 0.5], [0.25, 0.75]], dtype=np.float32)
    bones = np.stack([np.eye(4), np.eye(4)])
    skinned = skin_vertices(skinning_program, positions, indices, weights, bones)
    np.testing.assert_allclose(skinned, positions, atol=1e-6)


def test_skinning_matches_blend_formula(skinning_program):
    positions = np.array([[0.5, 1.0, 0.0], [0.0, 2.0, 0.0]], dtype=np.float32)
    indices = np.array([[0, 1], [0, 1]], dtype=np.uint32)
    weights = np.array([[0.5, 0.5], [0.0, 1.0]], dtype=np.float32)
    second = np.eye(4)
    second[:3, 3] = (1.0, 0.0, 0.0)
    bones = np.stack([np.eye(4), second])
    skinned = skin_vertices(skinning_program, positions, indices, weights, bones)
    np.testing.assert_allclose(skinned, [[1.0, 1.0, 0.0], [1.0, 2.0, 0.0]], atol=1e-6)


def test_vertex_bindings_layout(skinning_program):
    bones = np.arange(32, dtype=np.float32).reshape(2, 4, 4)
    inputs, constants = vertex_bindings(skinning_program, np.zeros((1, 3)), np.array([[1, 0]]),
                                        np.array([[0.25, 0.75]]), bones)
    np.testing.assert_array_equal(inputs["v0"], [[0, 0, 0, 1]])
    np.testing.assert_array_equal(inputs["v1"][:, :2], [[0.25, 0.75]])
    np.testing.assert_array_equal(constants["c0"], bones[1, 0:1])
    np.testing.assert_array_equal(constants["c7"], bones[0, 3:4])


def test_injection_uses_first_two_free_slots(surface_program):
    slots = gbuffer_slots(surface_program)
    assert (slots.id_output, slots.depth_output) == ("o1", "o2")


@given(st.lists(st.tuples(finite32, finite32, st.floats(0.0, 1.0, width=32)), min_size=1, max_size=20),
       st.integers(0, 10000))
def test_injection_leaves_original_outputs_untouched(surface_program, fragments, draw_index):
    v0 = np.array([[x, y, z, 1.0] for x, y, z in fragments], dtype=np.float32)
    original = execute_program(surface_program, {"v0": v0})
    injected = execute_program(inject_gbuffer_writes(surface_program, draw_index), {"v0": v0})
    assert np.array_equal(original["o0"].view(np.uint32), injected["o0"].view(np.uint32))
    assert np.all(injected["o1"] == np.float32(draw_index))
    np.testing.assert_array_equal(injected["o2"][:, :3], np.repeat(v0[:, 2:3], 3, axis=1))
    np.testing.assert_array_equal(injected["o2"][:, 3], original["o0"][:, 3])


def test_injection_needs_two_free_slots():
    program = parse_program("ps\nin v0:4\nout o0:4\nout o1:4\nmov o0, v0")
    with pytest.raises(NoFreeSlots):
        inject_gbuffer_writes(program, 3)


def test_injected_alpha_defaults_to_one():
    program = parse_program("ps\nin v0:4\nout o0:4\nout o1:4\nout o2:4\nmov o0.xyz, v0")
    out = execute_program(inject_gbuffer_writes(program, 7), {"v0": [1.0, 2.0, 0.5, 1.0]})
    np.testing.assert_array_equal(out["o2"], [0.5, 0.5, 0.5, 1.0])
    np.testing.assert_array_equal(out["o1"], [7.0, 7.0, 7.0, 7.0])


def test_injected_ids_stay_exact_in_float32():
    program = parse_program("ps\nin v0:4\nout o0:4\nout o1:4\nout o2:4\nmov o0.xyz, v0")
    out = execute_program(inject_gbuffer_writes(program, MAX_TAG), {"v0": [1.0, 2.0, 0.5, 1.0]})
    assert int(out["o1"][0]) == MAX_TAG
    for bad in (MAX_TAG + 1, -1, 2.5):
        with pytest.raises(InputError):
            inject_gbuffer_writes(program, bad)
