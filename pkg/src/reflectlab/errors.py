"""Exception hierarchy shared by all reflectlab modules."""


class ReflectLabError(Exception):
    """Base class for every error raised by the package."""


class CatalogError(ReflectLabError):
    """Unknown catalog entry or invalid parameters."""


class DomainError(ReflectLabError):
    """A point or stencil falls outside the coordinate box of a chart."""


class ConditioningError(ReflectLabError):
    """The metric is numerically singular at the requested point."""


class GeodesicExitError(DomainError):
    """A geodesic left the chart box before reaching the requested length.

    ``exit_parameter`` holds the arclength at the last sample still inside.
    """

    def __init__(self, message, exit_parameter):
        super().__init__(message)
        self.exit_parameter = exit_parameter


class FermiChartError(ReflectLabError):
    """The Fermi map failed its injectivity check."""

    def __init__(self, message, suggested_eps=None):
        super().__init__(message)
        self.suggested_eps = suggested_eps


class UnsupportedGeodesicError(ReflectLabError):
    """No closed-form or Fermi reflection is available for a geodesic."""


class DegeneracyError(ReflectLabError):
    """The induced metric of a graph stopped being positive definite."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SolverDivergedError(ReflectLabError):
    """Newton/Picard iteration failed to reach the residual tolerance."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class NotAGeodesicBoundaryError(ReflectLabError):
    """The graph does not vanish on the axis representing the geodesic."""


class GlueError(ReflectLabError):
    """Two half-grids cannot be glued along the axis."""


class ConfigError(ReflectLabError):
    """Invalid pipeline configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
