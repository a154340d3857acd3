"""Exception hierarchy shared across the package.

The CLI maps each family to an exit code: config errors to 2, data and
parameter-domain errors to 3, invariant violations to 4.
"""


class SeqconfError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(SeqconfError):
    """Invalid experiment configuration. Carries every problem found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(SeqconfError, ValueError):
    """Malformed or out-of-order input data."""


class ParameterDomainError(SeqconfError, ValueError):
    """Model parameters or inputs outside their admissible domain."""


class NotReadyError(SeqconfError, RuntimeError):
    """An estimator was queried before it holds any observations."""


class InvariantViolation(SeqconfError, RuntimeError):
    """A runtime invariant failed; ``row`` locates the offending step."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
