"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ConfigurationError(ValueError):
    """A configuration value makes the requested computation impossible."""


class ContractError(RuntimeError):
    """A precondition of an operation was violated by its caller."""


class TrainingAbort(RuntimeError):
    """Training stopped because a loss became non-finite or I/O failed."""

    def __init__(self, message, component=None, step=None):
        super().__init__(message)
        self.component = component
        self.step = step
