from dataclasses import dataclass, replace

from src.errors import InputError, NoFreeSlots, UndeclaredRegister
from src.shader_ir import COMPONENTS, PIXEL
from src.shader_ir.program import FULL_MASK, Instruction, Operand
from src.settings import LOGGER

ALPHA = 3
MAX_TAG = 1 << 24  # float32 holds every integer up to 2**24 exactly


@dataclass(frozen=True)
class GBufferSlots:
    """Where an injected pixel program leaves its tags."""
    id_output: str
    depth_output: str  # depth in .xyz, alpha copy in .w


def _depth_operand(program, depth_source):
    name, _, letters = depth_source.partition(".")
    if name not in {d.name for d in program.input_decls}:
        raise UndeclaredRegister(f"depth source {name!r} is not a declared input", 0)
    component = COMPONENTS.index(letters[0]) if letters else 2
    return Operand(register=name, swizzle=(component,) * 4)


def gbuffer_slots(program):
    """The two free output slots injection will use, in declaration order."""
    free = [decl.name for decl in program.output_decls if not decl.used]
    if len(free) < 2:
        raise NoFreeSlots(
            f"shader {program.shader_id} has {len(free)} unused output slot(s), injection needs 2")
    return GBufferSlots(id_output=free[0], depth_output=free[1])


def inject_gbuffer_writes(pixel_prog, id_value, depth_source="v0"):
    """
    Rewrites a pixel program so that it also emits G-buffer tags.

    The resource id is broadcast to the first unused output, depth (taken from
    `depth_source`, component z unless a swizzle is given) goes to `.xyz` of the
    second unused output, and every instruction that writes the alpha channel of
    the colour output is duplicated right after itself, redirected to `.w` of the
    second slot. Original outputs are never touched.

    Args:
        pixel_prog (ShaderProgram): Pixel program to rewrite.
        id_value (int): Resource identifier to broadcast.
        depth_source (str): Input register carrying depth, e.g. `v0` or `v0.z`.

    Returns:
        ShaderProgram: Rewritten program.

    Raises:
        NoFreeSlots: Fewer than two output slots are unused.
        InputError: The id is not an integer in [0, 2**24].
    """
    if pixel_prog.kind != PIXEL:
        raise InputError(f"shader {pixel_prog.shader_id} is not a pixel program")
    slots = gbuffer_slots(pixel_prog)
    depth = _depth_operand(pixel_prog, depth_source)
    if int(id_value) != id_value or not 0 <= id_value <= MAX_TAG:
        raise InputError(f"id {id_value} cannot be carried exactly by a float32 output")
    tag = float(id_value)

    body = [
        Instruction("mov", slots.id_output, FULL_MASK, (Operand(literal=(tag,) * 4),)),
        Instruction("mov", slots.depth_output, (0, 1, 2), (depth,)),
        Instruction("mov", slots.depth_output, (ALPHA,), (Operand(literal=(1.0,) * 4),)),
    ]
    used = [decl.name for decl in pixel_prog.output_decls if decl.used]
    colour = used[0] if used else None
    copies = 0
    for instr in pixel_prog.instructions:
        body.append(instr)
        if instr.dest != colour or ALPHA not in instr.mask:
            continue
        if colour in instr.registers_read():
            # the original overwrote one of its own sources: copy the result instead
            body.append(Instruction("mov", slots.depth_output, (ALPHA,),
                                    (Operand(register=colour, swizzle=(ALPHA,) * 4),)))
        else:
            body.append(replace(instr, dest=slots.depth_output, mask=(ALPHA,)))
        copies += 1

    LOGGER.debug(f"shader {pixel_prog.shader_id}: id -> {slots.id_output}, depth/alpha -> {slots.depth_output}, "
                 f"{copies} alpha write(s) duplicated")
    return pixel_prog.with_instructions(body)
