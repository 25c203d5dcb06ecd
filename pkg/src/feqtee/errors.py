"""Exception hierarchy for the feqtee toolchain.

Every error raised on purpose derives from FeqTeeError so callers (CLI,
service, interpreter) can distinguish structured failures from bugs.
"""


class FeqTeeError(Exception):
    """Base class for all structured errors."""


class MalformedFileError(FeqTeeError):
    """Input file could not be parsed; carries a line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonManifoldError(FeqTeeError):
    """Mesh connectivity violates 2-manifoldness."""


class NotQuadError(FeqTeeError):
    """An operation requiring quads hit a non-quad face."""


class TopologyError(FeqTeeError):
    """A face set does not have the required (disk) topology."""


class UnsupportedLoopError(FeqTeeError):
    """Face loop is self-intersecting, self-adjacent or non-separating."""


class DegenerateResultError(FeqTeeError):
    """Operation would produce a degenerate mesh (e.g. a 2-face pillow)."""


class SolverError(FeqTeeError):
    """Linear solve failed or produced a non-injective parametrization."""


class FrameError(FeqTeeError):
    """Local frame construction degenerated (zero normal/tangent)."""


class SelectionError(FeqTeeError):
    """Patch selection from a region curve failed."""


class DecompositionError(FeqTeeError):
    """Feature cannot be decomposed (e.g. inward-branching extrusion)."""


class TeeSyntaxError(FeqTeeError):
    """TEE text is not well formed; carries the character offset."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"offset {offset}: {message}")


class TeeSemanticError(FeqTeeError):
    """TEE program is well formed but violates program invariants."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"offset {offset}: {message}"
        super().__init__(message)


class UnknownExtrusionError(FeqTeeError):
    """TEE references an extrusion id absent from the record store."""


class ExecutionError(FeqTeeError):
    """TEE execution failed; carries the failing instruction index."""

    def __init__(self, message, instruction_index, cause=None):
        self.instruction_index = instruction_index
        self.cause = cause
        super().__init__(f"instruction {instruction_index}: {message}")
