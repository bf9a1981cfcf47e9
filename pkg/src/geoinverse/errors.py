"""Exception hierarchy shared by every stage of the pipeline."""


class GeoInverseError(Exception):
    """Base class for all library errors."""


class DomainError(GeoInverseError, ArithmeticError):
    """Numeric evaluation left the real domain (pole, log of nonpositive, ...)."""


class IndeterminateError(GeoInverseError):
    """Probabilistic zero-testing could not find enough valid sample points."""


class ParseError(GeoInverseError):
    """Input text could not be turned into an object.

    ``line`` and ``column`` are 1-based; either may be ``None`` when the
    failure is not tied to a position.
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(self._format())

    def _format(self):
        if self.line is None:
            return self.message
        if self.column is None:
            return f"line {self.line}: {self.message}"
        return f"line {self.line}, column {self.column}: {self.message}"


class GeoSyntaxError(ParseError):
    pass


class DegreeError(ParseError):
    """A geodesic right-hand side has a term that is not quadratic in velocities."""


class UnknownSymbolError(ParseError):
    pass


class IndexOutOfRangeError(ParseError, IndexError):
    pass


class SymmetryConflictError(ParseError):
    pass


class SingularMetricError(GeoInverseError):
    pass


class ChartMismatchError(GeoInverseError):
    pass


class InconsistentRelationsError(GeoInverseError):
    """The curvature relations admit only the zero metric."""

    def __init__(self, message, evidence=None):
        self.evidence = evidence
        super().__init__(message)


class IntegrabilityError(GeoInverseError):
    """The metric PDE system is inconsistent.

    ``evidence`` holds the offending expression or residual so callers can
    report something checkable.
    """

    def __init__(self, message, evidence=None):
        self.evidence = evidence
        super().__init__(message)


class ConstantResolutionError(GeoInverseError):
    """Back-substitution leaves no nonzero choice of the block constants."""

    def __init__(self, message, evidence=None):
        self.evidence = evidence
        super().__init__(message)


class PipelineError(GeoInverseError):
    """An internal sanity assertion failed; this is a bug, not a verdict."""
