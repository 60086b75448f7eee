"""Exception hierarchy shared by the analysis, synthesis and CLI layers."""


class KreissError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(KreissError, ValueError):
    """Matrix or channel dimensions are inconsistent."""


class NotHurwitzError(KreissError):
    """A matrix required to be Hurwitz has an eigenvalue with Re >= 0."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class WellPosednessError(KreissError):
    """An LFT interconnection is not well posed (singular loop matrix)."""


class NumericalFailure(KreissError):
    """An iterative numerical method failed to converge."""


class InfeasibleError(KreissError):
    """No controller satisfying the stability/region constraints was found."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class NonConvergenceError(KreissError):
    """The scenario loop hit its iteration cap."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class StationarityReport(KreissError):
    """The local optimizer cannot make progress (line search failure)."""


class DivergenceError(KreissError):
    """Time integration failed (step-size underflow or blow-up)."""


class ParseError(KreissError, ValueError):
    """A system file could not be parsed."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column


class NoThresholdError(KreissError, ValueError):
    """Both ends of a threshold bracket lead to the same terminal state."""
