"""
Program model and text assembly for the shader register IR.

A listing is a sequence of statements separated by newlines or `;`:

    vs                          // kind: vs (vertex) or ps (pixel)
    in v0:4                     // input register and its arity
    out o_pos:4
    const c0..c3:4              // a range of constant registers
    m44 o_pos, v0, c0           // instructions: opcode dest[.mask], sources...

Temporaries `r<k>` need no declaration and start at zero, as do outputs.
Sources are registers with an optional swizzle (`.x`, `.xxyy`) or literals
(`l(1, 2, 3, 4)`, `l(0.5)` or a bare number, both broadcast to four lanes).
"""
import re
from dataclasses import dataclass, field, replace

import numpy as np

from src.errors import ShaderSyntaxError, UndeclaredRegister
from src.shader_ir import COMPONENTS, KIND_TOKENS, OPCODES, POSITION_OUTPUT, VERTEX

_TEMP = re.compile(r"r\d+")
_NAME = re.compile(r"[A-Za-z_]\w*")
_NUMBERED = re.compile(r"(.*?)(\d+)")
_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
IDENTITY_SWIZZLE = (0, 1, 2, 3)
FULL_MASK = (0, 1, 2, 3)


@dataclass(frozen=True)
class Operand:
    register: str | None = None
    swizzle: tuple[int, ...] = IDENTITY_SWIZZLE
    literal: tuple[float, ...] | None = None

    @property
    def is_literal(self):
        return self.literal is not None


@dataclass(frozen=True)
class Instruction:
    opcode: str
    dest: str
    mask: tuple[int, ...]
    sources: tuple[Operand, ...]
    line: int = field(default=0, compare=False)

    @property
    def shape(self):
        return OPCODES[self.opcode][1]

    def registers_read(self):
        """Every register name this instruction reads, matrix rows included."""
        names = {src.register for src in self.sources if not src.is_literal}
        if self.opcode == "m44":
            names.discard(self.sources[1].register)
            names.update(matrix_rows(self.sources[1].register))
        return names


@dataclass(frozen=True)
class Declaration:
    name: str
    arity: int
    used: bool = True


@dataclass(frozen=True)
class ShaderProgram:
    shader_id: int
    kind: str
    input_decls: tuple[Declaration, ...]
    output_decls: tuple[Declaration, ...]
    constant_decls: tuple[Declaration, ...]
    instructions: tuple[Instruction, ...]

    def output(self, name):
        for decl in self.output_decls:
            if decl.name == name:
                return decl
        return None

    def declared(self):
        return {decl.name: decl for decl in self.input_decls + self.output_decls + self.constant_decls}

    def with_instructions(self, instructions, output_decls=None):
        """Copy of the program with a new body; output `used` flags are recomputed."""
        instructions = tuple(instructions)
        outputs = mark_used(output_decls if output_decls is not None else self.output_decls, instructions)
        return replace(self, instructions=instructions, output_decls=outputs)


def matrix_rows(base):
    """Names of the four row registers of an `m44` operand (c4 -> c4, c5, c6, c7)."""
    match = _NUMBERED.fullmatch(base)
    if match is None:
        raise ValueError(f"matrix operand {base!r} has no numeric suffix")
    prefix, index = match.group(1), int(match.group(2))
    return [f"{prefix}{index + k}" for k in range(4)]


def mark_used(output_decls, instructions):
    """An output slot is used as soon as any instruction writes or reads it."""
    touched = set()
    for instr in instructions:
        touched.add(instr.dest)
        touched.update(instr.registers_read())
    return tuple(replace(decl, used=decl.name in touched) for decl in output_decls)


def is_temporary(name):
    return _TEMP.fullmatch(name) is not None


def _split_operands(text):
    parts, depth, current = [], 0, []
    for char in text:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        if char == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(char)
    if current or parts:
        parts.append("".join(current).strip())
    return [p for p in parts]


def _parse_components(letters, line):
    if not letters or any(c not in COMPONENTS for c in letters):
        raise ShaderSyntaxError(f"bad component selector {letters!r}", line)
    return tuple(COMPONENTS.index(c) for c in letters)


def _float32(value):
    return float(np.float32(value))


def _parse_source(token, declared, line):
    if not token:
        raise ShaderSyntaxError("empty operand", line)
    if token.startswith("l(") and token.endswith(")"):
        try:
            values = [_float32(v) for v in token[2:-1].split(",")]
        except ValueError as exc:
            raise ShaderSyntaxError(f"bad literal {token!r}", line) from exc
        if len(values) == 1:
            values = values * 4
        if len(values) != 4:
            raise ShaderSyntaxError(f"literal needs 1 or 4 values: {token!r}", line)
        return Operand(literal=tuple(values))
    if _NUMBER.fullmatch(token):
        return Operand(literal=(_float32(token),) * 4)
    name, _, letters = token.partition(".")
    if not _NAME.fullmatch(name):
        raise ShaderSyntaxError(f"bad operand {token!r}", line)
    if name not in declared and not is_temporary(name):
        raise UndeclaredRegister(f"register {name!r} is not declared", line)
    swizzle = IDENTITY_SWIZZLE
    if letters:
        comps = _parse_components(letters, line)
        # short swizzles repeat their last component
        swizzle = comps + (comps[-1],) * (4 - len(comps)) if len(comps) < 4 else comps[:4]
    return Operand(register=name, swizzle=swizzle)


def _parse_dest(token, outputs, line):
    name, _, letters = token.partition(".")
    if name not in outputs and not is_temporary(name):
        raise ShaderSyntaxError(f"cannot write to {name!r}: not an output or temporary", line)
    mask = FULL_MASK
    if letters:
        comps = _parse_components(letters, line)
        if len(set(comps)) != len(comps) or list(comps) != sorted(comps):
            raise ShaderSyntaxError(f"write mask {letters!r} must list components in xyzw order", line)
        mask = comps
    return name, mask


def _parse_declaration(keyword, body, line):
    spec, sep, arity_text = body.partition(":")
    if not sep:
        raise ShaderSyntaxError(f"declaration {body!r} needs an arity", line)
    try:
        arity = int(arity_text)
    except ValueError as exc:
        raise ShaderSyntaxError(f"bad arity in {body!r}", line) from exc
    if not 1 <= arity <= 4:
        raise ShaderSyntaxError(f"arity must be within 1..4, got {arity}", line)
    spec = spec.strip()
    if ".." in spec:
        first, last = (s.strip() for s in spec.split("..", 1))
        m_first, m_last = _NUMBERED.fullmatch(first), _NUMBERED.fullmatch(last)
        if not m_first or not m_last or m_first.group(1) != m_last.group(1):
            raise ShaderSyntaxError(f"bad register range {spec!r}", line)
        start, stop = int(m_first.group(2)), int(m_last.group(2))
        if stop < start:
            raise ShaderSyntaxError(f"empty register range {spec!r}", line)
        names = [f"{m_first.group(1)}{k}" for k in range(start, stop + 1)]
    else:
        if not _NAME.fullmatch(spec):
            raise ShaderSyntaxError(f"bad register name {spec!r}", line)
        names = [spec]
    if any(is_temporary(n) for n in names):
        raise ShaderSyntaxError(f"temporaries cannot be declared as {keyword}", line)
    return [Declaration(n, arity) for n in names]


def parse_program(text, shader_id=0):
    """
    Parses an assembly listing into a ShaderProgram.

    Args:
        text (str): Listing in the text assembly format.
        shader_id (int): Identifier assigned to the program.

    Returns:
        ShaderProgram: Program with declarations, instructions and output usage flags.

    Raises:
        ShaderSyntaxError: Malformed statement, unknown opcode or bad operand count.
        UndeclaredRegister: An instruction reads a register nobody declared.
    """
    kind = None
    decls = {"in": [], "out": [], "const": []}
    raw_instructions = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        raw = raw.split("//", 1)[0]
        for stmt in raw.split(";"):
            stmt = stmt.strip()
            if not stmt:
                continue
            head, _, rest = stmt.replace("\t", " ").partition(" ")
            head = head.lower()
            if head in KIND_TOKENS and not rest.strip():
                if kind is not None:
                    raise ShaderSyntaxError("program kind declared twice", line_no)
                kind = KIND_TOKENS[head]
            elif head in decls:
                decls[head].extend(_parse_declaration(head, rest.strip(), line_no))
            elif head in OPCODES:
                raw_instructions.append((line_no, head, rest))
            else:
                raise ShaderSyntaxError(f"unknown opcode or directive {head!r}", line_no)
    if kind is None:
        raise ShaderSyntaxError("missing program kind (vs or ps)", 1)

    all_decls = decls["in"] + decls["out"] + decls["const"]
    declared = {}
    for decl in all_decls:
        if decl.name in declared:
            raise ShaderSyntaxError(f"register {decl.name!r} declared twice", 1)
        declared[decl.name] = decl
    outputs = {d.name for d in decls["out"]}
    if kind == VERTEX and POSITION_OUTPUT not in outputs:
        raise ShaderSyntaxError(f"vertex programs must declare {POSITION_OUTPUT}", 1)

    instructions = []
    for line_no, opcode, rest in raw_instructions:
        operands = _split_operands(rest)
        n_sources = OPCODES[opcode][0]
        if len(operands) != n_sources + 1:
            raise ShaderSyntaxError(
                f"{opcode} takes {n_sources} sources, got {max(len(operands) - 1, 0)}", line_no)
        dest, mask = _parse_dest(operands[0], outputs, line_no)
        sources = tuple(_parse_source(tok, declared, line_no) for tok in operands[1:])
        if opcode == "m44":
            if sources[1].is_literal:
                raise ShaderSyntaxError("m44 needs a register as its matrix operand", line_no)
            try:
                rows = matrix_rows(sources[1].register)
            except ValueError as exc:
                raise ShaderSyntaxError(str(exc), line_no) from exc
            for row in rows:
                if row not in declared:
                    raise UndeclaredRegister(f"matrix row {row!r} is not declared", line_no)
        instructions.append(Instruction(opcode, dest, mask, sources, line=line_no))

    instructions = tuple(instructions)
    return ShaderProgram(
        shader_id=shader_id,
        kind=kind,
        input_decls=tuple(decls["in"]),
        output_decls=mark_used(tuple(decls["out"]), instructions),
        constant_decls=tuple(decls["const"]),
        instructions=instructions,
    )


def _format_operand(src):
    if src.is_literal:
        return "l(" + ", ".join(repr(v) for v in src.literal) + ")"
    if src.swizzle == IDENTITY_SWIZZLE:
        return src.register
    return src.register + "." + "".join(COMPONENTS[c] for c in src.swizzle)


def format_instruction(instr):
    dest = instr.dest if instr.mask == FULL_MASK else instr.dest + "." + "".join(COMPONENTS[c] for c in instr.mask)
    return f"{instr.opcode} {dest}, " + ", ".join(_format_operand(s) for s in instr.sources)


def format_program(program):
    """Renders a program back into the text assembly form (the SHDR payload)."""
    kind_token = {v: k for k, v in KIND_TOKENS.items()}[program.kind]
    lines = [kind_token]
    for keyword, group in (("in", program.input_decls), ("out", program.output_decls),
                           ("const", program.constant_decls)):
        lines.extend(f"{keyword} {d.name}:{d.arity}" for d in group)
    lines.extend(format_instruction(instr) for instr in program.instructions)
    return "\n".join(lines) + "\n"
