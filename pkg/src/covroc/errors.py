"""Exception hierarchy."""


class CovrocError(Exception):
    """Base class for all errors raised by covroc."""


class InvalidInputError(CovrocError, ValueError):
    """An argument or dataset violates a documented precondition."""


class EvaluationError(CovrocError, ArithmeticError):
    """A kernel fit cannot be evaluated at a requested covariate value."""

    def __init__(self, message: str, x: float | None = None):
        super().__init__(message)
        self.x = x


class SelectionError(CovrocError, RuntimeError):
    """Bandwidth selection found no usable candidate."""


class ReplicateError(CovrocError, RuntimeError):
    """A bootstrap replicate failed; carries the replicate index."""

    def __init__(self, message: str, replicate: int, population: str | None = None):
        super().__init__(message)
        self.replicate = replicate
        self.population = population


class MonteCarloError(CovrocError, RuntimeError):
    """A simulated replication failed; carries its cell coordinates."""

    def __init__(self, message: str, cell: tuple):
        super().__init__(message)
        self.cell = cell
