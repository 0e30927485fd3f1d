"""Exception hierarchy shared by every module."""


class GeometryError(Exception):
    """Base class for all errors raised by prehomog."""


class NumericalError(GeometryError):
    """A valid request that failed for numerical reasons."""


class DomainError(NumericalError):
    """A point lies outside the chart or an expression is not evaluable there."""


class DomainEscape(DomainError):
    """An integrated trajectory left the chart domain."""


class OrderError(GeometryError):
    """A derivative or jet order outside the supported range was requested."""


class SingularArrow(NumericalError):
    """The 1-jet part of an arrow is not invertible."""


class SingularFrame(NumericalError):
    """The frame matrix w(x) is not invertible."""


class DegenerateMetric(NumericalError):
    """The metric is not positive definite at a point."""


class NotMetricArrow(GeometryError):
    """An arrow does not preserve the metric."""


class NotMetricJet(GeometryError):
    """A 1-jet is not an infinitesimal isometry of the metric."""


class ZeroReference(NumericalError):
    """The constant-curvature reference tensor vanishes."""


class ParseError(GeometryError):
    """Malformed expression text."""

    def __init__(self, message, line=1, column=1, source=None):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{message} (line {line}, column {column})")


class SchemaError(GeometryError):
    """Geometry file does not match the expected layout."""


class SymmetryError(GeometryError):
    """Components that must be symmetric are not."""
