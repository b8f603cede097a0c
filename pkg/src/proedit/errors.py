"""Exception types shared across the package."""


class ProeditError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(ProeditError):
    """Shape, dimension, or resolution mismatch between values that must agree."""


class EmbeddingParseError(ProeditError):
    """Malformed embedding file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TransportError(ProeditError):
    """Retryable failure talking to a remote editor endpoint."""


class EditAbortError(TransportError):
    """Editing failed permanently (retries exhausted); the subtask must abort."""


class TrainingAbort(ProeditError):
    """Non-finite loss or other unrecoverable training state."""


class CloudEmptiedError(ProeditError):
    """Maintenance culled every Gaussian, which signals divergence."""


class DecompositionError(ProeditError):
    """Subtask decomposition exceeded its limits on a named interval."""


class IntegrityError(ProeditError):
    """A referenced run artifact (checkpoint, snapshot) is missing or corrupt."""


class ControlError(ProeditError):
    """A control operation was issued in a state that does not allow it."""
