"""Exception hierarchy shared across the toolkit."""


class SensorcalError(Exception):
    """Base class for all toolkit errors."""


class DataError(SensorcalError):
    """Structural problem with a dataset (bad layout, bad split, bad schema)."""


class ParseError(DataError):
    """Malformed file content; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SingularityError(SensorcalError):
    """Rank-deficient least-squares system; names the offending columns."""

    def __init__(self, columns, message=None):
        self.columns = list(columns)
        if message is None:
            message = (
                "design matrix is rank deficient; offending columns: "
                + ", ".join(str(c) for c in self.columns)
            )
        super().__init__(message)


class ConvergenceError(SensorcalError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class TrialFailure(SensorcalError):
    """A single benchmark trial failed (divergence, non-convergence, ...).

    Recorded and skipped by the experiment runner rather than aborting the
    whole run.
    """
