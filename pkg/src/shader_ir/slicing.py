from dataclasses import dataclass

from src.errors import UnknownOutput
from src.shader_ir.program import ShaderProgram, matrix_rows


@dataclass(frozen=True)
class SliceResult:
    program: ShaderProgram
    kept: tuple[int, ...]


def _components_needed(instr, live_components):
    """(register, component) pairs an instruction reads to produce `live_components` of its dest."""
    needed = set()
    shape = instr.shape
    for pos, src in enumerate(instr.sources):
        if src.is_literal:
            continue
        if shape == "componentwise":
            needed.update((src.register, src.swizzle[k]) for k in live_components)
        elif shape == "dot":
            needed.update((src.register, c) for c in set(src.swizzle))
        elif shape == "matrix":
            if pos == 0:
                needed.update((src.register, c) for c in set(src.swizzle))
            else:
                rows = matrix_rows(src.register)
                needed.update((rows[k], c) for k in live_components for c in range(4))
    return needed


def slice_program(program, target):
    """
    Backward data-flow slice of `program` toward one output register.

    Liveness is tracked per component through write masks and swizzles, so an
    instruction is kept only if one of the components it writes reaches the
    target. Kept instructions stay in their original order.

    Args:
        program (ShaderProgram): Program to slice.
        target (str): Declared output register (e.g. `o_pos`).

    Returns:
        SliceResult: Sliced program and the original indices of kept instructions.

    Raises:
        UnknownOutput: `target` is not a declared output.
    """
    decl = program.output(target)
    if decl is None:
        raise UnknownOutput(f"{target!r} is not a declared output of shader {program.shader_id}")

    live = {(target, c) for c in range(decl.arity)}
    kept = []
    for index in range(len(program.instructions) - 1, -1, -1):
        instr = program.instructions[index]
        written = {(instr.dest, c) for c in instr.mask}
        hit = written & live
        if not hit:
            continue
        kept.append(index)
        live -= hit
        live |= _components_needed(instr, sorted(c for _, c in hit))
    kept.reverse()

    sliced = program.with_instructions(program.instructions[i] for i in kept)
    return SliceResult(program=sliced, kept=tuple(kept))
