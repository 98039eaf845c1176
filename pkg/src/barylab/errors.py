"""Exception hierarchy shared by the solvers and the experiment driver."""


class BarylabError(Exception):
    """Base class for every error raised by barylab."""


class DomainError(BarylabError, ValueError):
    """An input lies outside the domain of the operation (e.g. log of zero)."""


class DimensionMismatch(BarylabError, ValueError):
    pass


class NumericalError(BarylabError, ArithmeticError):
    """Log-domain quantity left the representable range."""


class NonConvergence(BarylabError, RuntimeError):
    pass


class IterationCapExceeded(NonConvergence):
    """A solver exceeded an iteration budget that a proven bound says suffices."""


class CapExceeded(NonConvergence):
    """Adaptive AGD hit its fixed-N cap before both stopping tests held."""

    def __init__(self, message, gap=None, consensus=None):
        super().__init__(message)
        self.gap = gap
        self.consensus = consensus


class DegenerateInput(BarylabError, ValueError):
    pass


class DisconnectedGraph(BarylabError, ValueError):
    pass


class ParseError(BarylabError, ValueError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class LocalityViolation(BarylabError, RuntimeError):
    """An agent touched data or messages it has no right to see."""
