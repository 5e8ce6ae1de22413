"""Exception hierarchy shared across the package."""


class EncganError(Exception):
    """Base class for all package-specific errors."""


class ContractError(EncganError, ValueError):
    """A documented precondition was violated by the caller."""


class DimensionMismatchError(ContractError):
    """Operand shapes are incompatible."""


class SingularMatrixError(EncganError, ArithmeticError):
    """A matrix required to be full rank is rank deficient.

    Carries the offending (smallest) eigenvalue when known.
    """

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DataFormatError(EncganError, ValueError):
    """A binary or structured file does not match its declared layout.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None, path=None):
        super().__init__(message)
        self.offset = offset
        self.path = path


class UnsupportedVersionError(DataFormatError):
    """A checkpoint declares a format version this build cannot read."""


class ConfigError(EncganError, ValueError):
    """A run configuration failed validation.

    ``problems`` lists every offending key, not just the first.
    """

    def __init__(self, problems):
        problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(problems))
        self.problems = problems


class TrainingAbortError(EncganError, ArithmeticError):
    """Training produced a non-finite loss and was stopped.

    ``snapshot`` holds diagnostics about the offending step and batch.
    """

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class OptimizationError(EncganError, ArithmeticError):
    """An iterative optimization diverged.

    ``trace`` holds the objective values observed before the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
