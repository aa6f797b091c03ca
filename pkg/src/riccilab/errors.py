"""Exception hierarchy shared by every riccilab module."""


class RiccilabError(Exception):
    """Base class for all library errors."""


class InvalidInput(RiccilabError, ValueError):
    pass


class TriangleViolation(InvalidInput):
    pass


class NoPath(RiccilabError):
    """Two nodes lie in different connected components."""


class RefuseStep(RiccilabError):
    """An explicit step would violate the stability bound."""


class SolverFailure(RiccilabError):
    """Newton iteration failed to converge.

    ``residual`` holds the last residual norm and ``trajectory`` (when raised
    from a full run) the snapshots recorded before the failure.
    """

    def __init__(self, message, residual=float("nan"), trajectory=None):
        super().__init__(message)
        self.residual = residual
        self.trajectory = trajectory


class UndefinedAVR(RiccilabError):
    pass


class HypothesisViolation(RiccilabError):
    pass


class RadiusExhausted(RiccilabError):
    pass


class ConfigError(RiccilabError):
    """Scenario configuration could not be parsed; ``location`` names the key."""

    def __init__(self, message, location=None):
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
        self.location = location
