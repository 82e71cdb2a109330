"""Exception hierarchy shared by every stage of the ground-truth pipeline."""


class GroundTruthError(Exception):
    """Root of all pipeline errors."""


class InputError(GroundTruthError):
    """Malformed or inconsistent input. The CLI maps these to exit status 2."""


class IoFailure(GroundTruthError):
    """Filesystem failure. The CLI maps these to exit status 3."""


# Trace container

class ContainerError(InputError):
    def __init__(self, message, offset=0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagic(ContainerError):
    pass


class VersionMismatch(ContainerError):
    pass


class CorruptChunk(ContainerError):
    pass


class DanglingRef(ContainerError):
    pass


class InvalidSequence(InputError):
    def __init__(self, violation):
        super().__init__(f"invalid sequence: {violation}")
        self.violation = violation


# Shader IR

class ShaderSyntaxError(InputError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UndeclaredRegister(ShaderSyntaxError):
    pass


class UnboundRegister(InputError):
    pass


class UnknownOutput(InputError):
    pass


class NoFreeSlots(InputError):
    pass


# Geometry: degenerate recorded data, reported as input errors

class DegenerateW(InputError):
    pass


class DegenerateTriangle(InputError):
    pass


class SingularMatrix(InputError):
    pass


class SingularView(SingularMatrix):
    pass


class DegenerateDepth(InputError):
    pass


class NotSkinned(InputError):
    pass


class EmptyGeometry(InputError):
    pass


class InvalidScript(InputError):
    pass


# Metrics

class DimensionMismatch(InputError):
    pass


class NoValidPixels(InputError):
    pass


class TrajectoryTooShort(InputError):
    pass


class NotNormalized(InputError):
    pass


class NegativeMass(InputError):
    pass
