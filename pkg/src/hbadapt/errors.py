"""Exception types raised by the toolkit."""


class HbAdaptError(Exception):
    """Base class for all toolkit errors."""


class TopologyError(HbAdaptError):
    """Mesh connectivity is not a 2-manifold triangulation."""


class GeometryError(HbAdaptError):
    """Degenerate geometry, e.g. a zero-area triangle."""


class MeshParseError(HbAdaptError):
    """Malformed mesh or field file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigurationError(HbAdaptError):
    """Problem data does not cover the mesh, or an option is invalid."""


class DimensionError(HbAdaptError):
    """A field does not match the mesh it is used with."""


class SolverError(HbAdaptError):
    """A linear solve failed to reach its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
