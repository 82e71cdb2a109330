COMPONENTS = "xyzw"

# opcode -> (source count, data-flow shape)
#   componentwise: dest component k reads component swizzle[k] of every source
#   dot:           every written component reads all four components of both sources
#   matrix:        dest component k reads all of src0 and constant row (base + k)
OPCODES = {
    "mov": (1, "componentwise"),
    "add": (2, "componentwise"),
    "sub": (2, "componentwise"),
    "mul": (2, "componentwise"),
    "mad": (3, "componentwise"),
    "min": (2, "componentwise"),
    "max": (2, "componentwise"),
    "rcp": (1, "componentwise"),
    "dp4": (2, "dot"),
    "m44": (2, "matrix"),
}

VERTEX = "vertex"
PIXEL = "pixel"
KIND_TOKENS = {"vs": VERTEX, "ps": PIXEL}

POSITION_OUTPUT = "o_pos"
