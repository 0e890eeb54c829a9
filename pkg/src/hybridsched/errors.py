"""Exception hierarchy shared across the package."""


class HybridSchedError(Exception):
    """Base class for all package errors."""


class GraphFormatError(HybridSchedError, ValueError):
    """Malformed or invalid graph input.

    ``location`` is a human-readable pointer (line number, edge index) into
    the offending input, or ``None`` when not applicable.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class InfeasibleError(HybridSchedError, ValueError):
    """The latency bound admits no schedule, or a model has no feasible point."""


class ModelError(HybridSchedError, ValueError):
    """Invalid ILP model, variable table or warm-start content."""


class NonFiniteGradientError(HybridSchedError, FloatingPointError):
    """Gradient descent produced NaN/inf values."""

    def __init__(self, message, dump=None):
        self.dump = dump or {}
        super().__init__(message)


class SolverError(HybridSchedError, RuntimeError):
    """Generic solver failure."""


class ExternalSolverError(SolverError):
    """External solver process failed or produced unusable output."""


class VerificationError(ExternalSolverError):
    """A solver-reported schedule does not satisfy the constraints locally."""


class RaceError(SolverError):
    """Every lane of a race failed; ``diagnostics`` holds one entry per lane."""

    def __init__(self, message, diagnostics):
        self.diagnostics = list(diagnostics)
        detail = "; ".join(f"lane {i}: {d}" for i, d in enumerate(self.diagnostics))
        super().__init__(f"{message} ({detail})")
