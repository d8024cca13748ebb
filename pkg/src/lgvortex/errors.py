"""Exception hierarchy shared by all lgvortex modules."""


class LGVortexError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(LGVortexError, ValueError):
    pass


class NonConvergence(LGVortexError, RuntimeError):
    """Profile solver hit its iteration cap or lost its bisection bracket."""


class InterpolationError(LGVortexError, ValueError):
    pass


class StencilOverflow(LGVortexError, ValueError):
    """Gauge potential too large for the grid spacing (max|eA|*h >= 0.5)."""


class LayoutMismatch(LGVortexError, ValueError):
    pass


class NoConvergence(LGVortexError, RuntimeError):
    """Iterative singular value solver failed to meet its residual contract."""


class ChannelNonConvergence(LGVortexError, RuntimeError):
    pass


class DimensionMismatch(LGVortexError, ValueError):
    pass


class UnknownSector(LGVortexError, ValueError):
    pass


class SectorMismatch(LGVortexError, ValueError):
    pass


class GridMismatch(LGVortexError, ValueError):
    pass


class WrongKernelDimension(LGVortexError, ValueError):
    pass


class ParseError(LGVortexError, ValueError):
    pass


class ValidationError(LGVortexError, ValueError):
    """Aggregated configuration violations; ``errors`` maps field path to message."""

    def __init__(self, errors):
        self.errors = dict(errors)
        lines = [f"{k}: {v}" for k, v in self.errors.items()]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class StageFailure(LGVortexError, RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


class MissingStage(LGVortexError, LookupError):
    pass


class CrossCheckFailure(LGVortexError, RuntimeError):
    """Two independent computations of the same quantity disagree."""
