import numpy as np

from src.errors import InputError, UnboundRegister
from src.shader_ir.program import matrix_rows


def _as_register(value, batch, name):
    arr = np.asarray(value, dtype=np.float32)
    if arr.shape[-1] > 4:
        raise InputError(f"binding for {name!r} has {arr.shape[-1]} components (max 4)")
    reg = np.zeros((batch, 4), dtype=np.float32)
    reg[:, :arr.shape[-1]] = arr
    return reg


def _batch_size(*bindings):
    batch = None
    for group in bindings:
        for name, value in group.items():
            arr = np.asarray(value)
            if arr.ndim == 2:
                if batch is not None and arr.shape[0] != batch:
                    raise InputError(f"binding {name!r} has batch {arr.shape[0]}, expected {batch}")
                batch = arr.shape[0]
            elif arr.ndim != 1:
                raise InputError(f"binding {name!r} must be a vector or a batch of vectors")
    return batch


def _read(operand, registers, batch):
    if operand.is_literal:
        return np.broadcast_to(np.asarray(operand.literal, dtype=np.float32), (batch, 4))
    reg = registers.get(operand.register)
    if reg is None:
        reg = registers.setdefault(operand.register, np.zeros((batch, 4), dtype=np.float32))
    return reg[:, list(operand.swizzle)]


def _dp4(a, b):
    prod = a * b
    return ((prod[:, 0] + prod[:, 1]) + prod[:, 2]) + prod[:, 3]


def _evaluate(instr, registers, batch):
    srcs = [_read(src, registers, batch) for src in instr.sources]
    op = instr.opcode
    if op == "mov":
        return srcs[0]
    if op == "add":
        return srcs[0] + srcs[1]
    if op == "sub":
        return srcs[0] - srcs[1]
    if op == "mul":
        return srcs[0] * srcs[1]
    if op == "mad":
        # not fused: the product is rounded before the add
        return (srcs[0] * srcs[1]) + srcs[2]
    if op == "min":
        return np.minimum(srcs[0], srcs[1])
    if op == "max":
        return np.maximum(srcs[0], srcs[1])
    if op == "rcp":
        return np.float32(1.0) / srcs[0]
    if op == "dp4":
        return np.repeat(_dp4(srcs[0], srcs[1])[:, None], 4, axis=1)
    if op == "m44":
        result = np.empty((batch, 4), dtype=np.float32)
        for k, row_name in enumerate(matrix_rows(instr.sources[1].register)):
            row = registers.get(row_name)
            if row is None:
                row = np.zeros((batch, 4), dtype=np.float32)
            result[:, k] = _dp4(srcs[0], row)
        return result
    raise InputError(f"unsupported opcode {op!r}")


def execute_program(program, inputs, constants=None):
    """
    Runs a program with 32-bit float semantics (round-to-nearest-even, no fused ops).

    Bindings map register names to vectors of up to four components, or to
    (N, k) batches; a batched binding runs the program once per row and the
    rows of every output correspond one-to-one with the rows of the inputs.

    Args:
        program (ShaderProgram): Program to run.
        inputs (dict): Input register bindings.
        constants (dict): Constant register bindings.

    Returns:
        dict: Output register name -> float32 array of the declared arity
        (batched if any binding was batched).

    Raises:
        UnboundRegister: A declared input or constant has no binding.
    """
    constants = constants or {}
    batch = _batch_size(inputs, constants)
    rows = batch if batch is not None else 1

    registers = {}
    for decl in program.input_decls:
        if decl.name not in inputs:
            raise UnboundRegister(f"input {decl.name!r} is not bound")
        registers[decl.name] = _as_register(inputs[decl.name], rows, decl.name)
    for decl in program.constant_decls:
        if decl.name not in constants:
            raise UnboundRegister(f"constant {decl.name!r} is not bound")
        registers[decl.name] = _as_register(constants[decl.name], rows, decl.name)
    for decl in program.output_decls:
        registers[decl.name] = np.zeros((rows, 4), dtype=np.float32)

    with np.errstate(all="ignore"):
        for instr in program.instructions:
            result = _evaluate(instr, registers, rows)
            target = registers.setdefault(instr.dest, np.zeros((rows, 4), dtype=np.float32))
            mask = list(instr.mask)
            target[:, mask] = result[:, mask]

    outputs = {}
    for decl in program.output_decls:
        value = registers[decl.name][:, :decl.arity].copy()
        outputs[decl.name] = value if batch is not None else value[0]
    return outputs
