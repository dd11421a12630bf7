"""Exception types shared across the package."""


class BeautykitError(Exception):
    """Base class for package errors."""


class ConfigurationError(BeautykitError):
    """A config value, file, or combination of components is invalid."""


class ValidationError(BeautykitError):
    """Input data violates a documented precondition."""


class NotReadyError(BeautykitError):
    """A model was used before its weights were initialized or fine-tuned."""


class TrainingDiverged(BeautykitError):
    """A loss became non-finite; carries the offending term values."""

    def __init__(self, message: str, terms: dict | None = None):
        super().__init__(message)
        self.terms = dict(terms or {})
