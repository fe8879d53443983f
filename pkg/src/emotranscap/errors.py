"""Exception hierarchy shared across the pipeline."""


class EmoTransError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(EmoTransError, ValueError):
    """A record or argument violates a documented invariant."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class RangeError(ValidationError):
    pass


class FormatError(ValidationError):
    """Audio or feature data has an unsupported layout."""


class ShapeError(ValidationError):
    pass


class NumericError(EmoTransError, ArithmeticError):
    pass


class ClientError(EmoTransError):
    """An external (or fallback) model client failed."""


class GenerationError(ClientError):
    def __init__(self, message: str, attempts: list | None = None):
        super().__init__(message)
        self.attempts = list(attempts or [])


class TranscriptionError(ClientError):
    pass


class ConsistencyError(EmoTransError):
    """Synthesized speech never matched the target emotion."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class CatalogError(EmoTransError, KeyError):
    def __str__(self) -> str:  # KeyError repr-quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class NormalizationError(EmoTransError):
    pass


class TargetError(ValidationError):
    pass


class TrainingError(EmoTransError):
    pass


class AlignmentError(EmoTransError):
    pass


class UnvoicedSignalError(EmoTransError):
    pass


class CompositionError(EmoTransError):
    def __init__(self, message: str, reports: list):
        super().__init__(message)
        self.reports = list(reports)


class CaptionParseError(EmoTransError, ValueError):
    pass


class SpecError(ValidationError):
    """Prompt spec inconsistent with the attribute sequence."""


class EvaluationError(EmoTransError):
    pass


class ConfigError(ValidationError):
    pass
