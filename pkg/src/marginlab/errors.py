"""Exception types shared across the package."""


class MarginlabError(Exception):
    """Base class for all errors raised by marginlab."""


class ShapeError(MarginlabError):
    """Operand dimensions are incompatible."""


class DomainError(MarginlabError):
    """Input lies outside an operation's mathematical domain, or a
    computation produced a non-finite value."""


class DegenerateVectorError(DomainError):
    """A vector with (near-)zero norm was passed where a direction is
    required."""


class ConfigError(MarginlabError):
    """Invalid hyperparameter, loss specification, or experiment config."""


class InfeasibleConfigurationError(MarginlabError):
    """The requested geometric configuration cannot exist (e.g. more than
    K+1 equiangular unit vectors in K dimensions)."""


class ProtocolError(MarginlabError):
    """An evaluation protocol precondition is violated (empty pair set,
    single-class pairs, infeasible operating point, ...)."""


class TrainingDivergedError(MarginlabError):
    """Training produced a non-finite loss. Carries the epoch index."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class CsvFormatError(MarginlabError):
    """A CSV input file is malformed. Carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
