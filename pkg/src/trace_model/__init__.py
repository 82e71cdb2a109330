MAGIC = b"VPTR"
VERSION = 1

# Chunk tags, in the order they are written
TAG_HEADER = b"SEQH"
TAG_CLASSES = b"CLSS"
TAG_MESH = b"MESH"
TAG_SHADER = b"SHDR"
TAG_FRAME = b"FRAM"

# G-buffer sentinel for background pixels (u32 max)
BACKGROUND = 0xFFFFFFFF

# shader_ref of draws that are transformed by matrices only
RIGID = -1
