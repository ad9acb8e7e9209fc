"""Exception hierarchy shared across the package."""


class MeshError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MeshError):
    """Bad input: malformed PLC, inconsistent config, unreadable file."""


class GeometryError(MeshError):
    """Degenerate geometry where a well-defined answer does not exist."""


class FeasibleRegionEmpty(MeshError):
    """The optimizer's feasible region contains no candidate point.

    Signals the caller to fall back to circumcenter or boundary handling.
    """


class InsertionCapExceeded(MeshError):
    """Refinement hit the insertion cap before reaching the quality target."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log
