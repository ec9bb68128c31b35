"""Exception types shared across the package."""


class TvspecError(Exception):
    """Base class for all package errors."""


class ParseError(TvspecError):
    """A mesh or signal file could not be parsed."""


class NonManifoldError(TvspecError):
    """An edge is shared by more than two faces."""


class DegenerateFaceError(TvspecError):
    """A face is degenerate (repeated vertex index or zero area)."""

    def __init__(self, face_index, message=None):
        self.face_index = int(face_index)
        super().__init__(message or f"degenerate face at index {face_index}")


class SingularMetricError(TvspecError):
    """The edge Gram matrix of a triangle is numerically singular."""

    def __init__(self, face_index, message=None):
        self.face_index = int(face_index)
        super().__init__(message or f"singular edge metric at face {face_index}")


class TooFewPointsError(TvspecError):
    """Not enough points to build the requested neighborhood graph."""


class FilterShapeMismatchError(TvspecError):
    """A filter specification does not match the decomposition it is applied to."""


class MapOutOfRangeError(TvspecError):
    """A correspondence map references elements outside the source domain."""


class ChannelMismatchError(TvspecError):
    """Two signals or decompositions disagree on channel count."""


class DigestError(TvspecError):
    """A decomposition and the supplied mesh belong to different geometries."""


class SolveFailureError(TvspecError):
    """A sparse linear solve did not reach the requested residual."""


class InstabilityError(TvspecError):
    """An explicit flow step exceeded the stability guard."""

    def __init__(self, step, message=None):
        self.step = int(step)
        super().__init__(message or f"explicit step {step} tripped the stability guard")
