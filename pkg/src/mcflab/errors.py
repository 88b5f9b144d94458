"""Exception types shared across the package."""


class McflabError(Exception):
    """Base class for all package errors."""


class NonManifoldMesh(McflabError):
    """An edge is not shared by exactly two faces, or orientation is inconsistent."""


class DegenerateFace(McflabError):
    """A face has zero (or numerically vanishing) area."""


class DisconnectedMesh(McflabError):
    """The mesh has more than one connected component."""

    def __init__(self, message, n_components=None):
        super().__init__(message)
        self.n_components = n_components


class LengthMismatch(McflabError):
    """A per-vertex field does not match the vertex count."""


class QualityCollapse(McflabError):
    """Minimum triangle quality dropped below the stop threshold during a step."""

    def __init__(self, message, state=None, min_quality=None):
        super().__init__(message)
        self.state = state
        self.min_quality = min_quality


class TimeOutOfRange(McflabError):
    """A requested time lies outside the admissible range."""


class EmptyHistory(McflabError):
    """A flow history with no snapshots was supplied."""


class InsufficientSupport(McflabError):
    """Too few vertices inside the fitting ball."""


class DegenerateFit(McflabError):
    """Normal covariance is nearly isotropic; the region is not neck-like."""

    def __init__(self, message, isotropy_ratio=None):
        super().__init__(message)
        self.isotropy_ratio = isotropy_ratio


class TrackLost(McflabError):
    """Neck track violated its tolerances at the very first snapshot."""

    def __init__(self, message, time=None, reason=None):
        super().__init__(message)
        self.time = time
        self.reason = reason


class TooShort(McflabError):
    """Sequence too short for the requested hypothesis check."""


class HypothesesFail(McflabError):
    """Lemma hypotheses do not hold for the supplied sequence."""


class GeneratorInvalid(McflabError):
    """A generated sequence failed the lemma hypotheses."""


class GateFailed(McflabError):
    """A snapshot failed the cylinder-closeness gate."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class SelfIntersecting(McflabError):
    """Generated mesh intersects itself."""


class InvalidParams(McflabError):
    """Scenario or experiment parameters are invalid."""
