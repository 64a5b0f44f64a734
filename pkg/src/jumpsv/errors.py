"""Exception types raised by the engine."""


class ModelViolation(ValueError):
    """A standing model assumption failed along a simulated path."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ConfigurationError(ValueError):
    """An operation was called outside the model configuration it supports."""


class SolverError(RuntimeError):
    pass


class SchemaError(ValueError):
    """A JSON document does not match the expected schema."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
