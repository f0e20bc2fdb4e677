"""Error types shared by every pointformer module."""


class PointformerError(Exception):
    """Base class for errors raised by pointformer operations."""


class InvalidArgument(PointformerError, ValueError):
    """An argument violates an operation's precondition (k > N, shape mismatch, ...)."""


class InvalidInput(PointformerError, ValueError):
    """Input data is malformed (non-finite coordinates, bad labels, missing features)."""


class InvalidState(PointformerError, RuntimeError):
    """An object is in the wrong state for the request (missing grads, stage mismatch)."""


class TrainingDiverged(InvalidState):
    """Loss became non-finite during training."""


class ConfigError(ValueError):
    """A configuration field failed validation. The message starts with the dotted field name."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")
