"""Exception hierarchy shared across the package."""


class ShapeGeoError(Exception):
    """Base class for all package errors."""


class InputShapeError(ShapeGeoError, ValueError):
    """Array shapes do not match the grid or ambient dimension."""


class DomainError(ShapeGeoError, ValueError):
    """Input lies outside the domain of an operation."""


class DegenerateImmersionError(ShapeGeoError):
    """The discrete derivative of a curve vanishes at some node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SpecError(ShapeGeoError, ValueError):
    """Inadmissible metric specification."""


class SolverError(ShapeGeoError):
    """An iterative solve failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FlowBreakdownError(ShapeGeoError):
    """Geodesic integration left the space of immersions.

    ``path`` holds the states computed up to the last valid step.
    """

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class LiftBreakdownError(ShapeGeoError):
    """The reparametrization of a horizontal lift stopped being monotone."""


class UnsupportedError(ShapeGeoError):
    """Requested combination is not supported (e.g. unknown bound constant)."""


class FileFormatError(ShapeGeoError):
    """An input file is missing, unreadable or malformed."""
