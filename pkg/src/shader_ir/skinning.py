"""
Vertex-stage plumbing: the checked-in reference listings and the input layout
used to run a (sliced) vertex program over a whole vertex buffer.

Layout: v0 = rest position (x, y, z, 1), v1 = blend weights in .xy, any other
input is zero. Constant registers named c<k> carry row k % 4 of the bone bound
to skin slot k // 4 of each vertex. The program's position output is the
skinned object-space position; world, view and projection are applied after.
"""
from functools import lru_cache
from pathlib import Path

import numpy as np

from src.shader_ir import POSITION_OUTPUT
from src.shader_ir.interpreter import execute_program
from src.shader_ir.program import parse_program
from src.shader_ir.slicing import slice_program

LISTINGS = Path(__file__).parent / "listings"


def load_listing(name, shader_id=0):
    """
    Parses one of the reference listings shipped with the package.

    Args:
        name (str): File name under `listings/` (e.g. 'skinning.vsh').
        shader_id (int): Identifier for the parsed program.

    Returns:
        ShaderProgram: Parsed program.
    """
    return parse_program((LISTINGS / name).read_text(), shader_id=shader_id)


@lru_cache(maxsize=256)
def position_slice(program):
    """Cached slice of a vertex program toward its position output."""
    return slice_program(program, POSITION_OUTPUT).program


def vertex_bindings(program, positions, skin_indices, skin_weights, bones):
    """
    Builds batched input/constant bindings for a vertex buffer.

    Args:
        program (ShaderProgram): Vertex program whose declarations are bound.
        positions (np.ndarray): (N, 3) rest positions.
        skin_indices (np.ndarray): (N, S) bone indices per vertex.
        skin_weights (np.ndarray): (N, S) blend weights per vertex.
        bones (np.ndarray): (B, 4, 4) bone matrices.

    Returns:
        tuple[dict, dict]: Input and constant bindings.
    """
    count = len(positions)
    rest = np.ones((count, 4), dtype=np.float32)
    rest[:, :3] = positions
    weights = np.zeros((count, 4), dtype=np.float32)
    weights[:, :skin_weights.shape[1]] = skin_weights

    inputs = {}
    for decl in program.input_decls:
        if decl.name == "v0":
            inputs[decl.name] = rest
        elif decl.name == "v1":
            inputs[decl.name] = weights
        else:
            inputs[decl.name] = np.zeros((count, 4), dtype=np.float32)

    bones = np.asarray(bones, dtype=np.float32)
    constants = {}
    for decl in program.constant_decls:
        index = int(decl.name[1:]) if decl.name[0] == "c" and decl.name[1:].isdigit() else -1
        slot, row = divmod(index, 4)
        if index < 0 or slot >= skin_indices.shape[1]:
            constants[decl.name] = np.zeros((count, 4), dtype=np.float32)
        else:
            constants[decl.name] = bones[skin_indices[:, slot], row, :]
    return inputs, constants


def skin_vertices(program, positions, skin_indices, skin_weights, bones):
    """
    Runs the position slice of a vertex program over a vertex buffer.

    Vertex order is preserved: row i of the result is the transform of rest
    vertex i.

    Returns:
        np.ndarray: (N, 3) float64 skinned object-space positions.
    """
    sliced = position_slice(program)
    inputs, constants = vertex_bindings(sliced, positions, skin_indices, skin_weights, bones)
    out = execute_program(sliced, inputs, constants)[POSITION_OUTPUT].astype(np.float64)
    return out[:, :3] / out[:, 3:4]
