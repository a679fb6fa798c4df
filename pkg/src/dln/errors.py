"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An argument violates a documented precondition (shape, range, mode)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a usable result."""


class DivergenceError(NumericalError):
    """Training or a recursion blew up (non-finite or absurdly large loss)."""

    def __init__(self, iteration: int, value: float):
        self.iteration = iteration
        self.value = value
        super().__init__(
            f"diverged at iteration {iteration}: loss/value {value!r}"
        )


class ParseError(ValueError):
    """A data file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ResourceBudgetError(RuntimeError):
    """An operation would exceed a configured memory budget."""


class ConfigError(ValueError):
    """An experiment configuration is invalid; carries the field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")
