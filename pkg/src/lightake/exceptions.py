"""Custom exceptions for lightake.

Every exception carries the CLI exit code it maps to.
"""


class LightAKEError(Exception):
    """Base exception for lightake errors."""

    exit_code = 1


class ConfigurationError(LightAKEError):
    """Raised when configuration values or flags are invalid."""

    exit_code = 2


class CorpusIOError(LightAKEError):
    """Raised when a corpus, model or resource file cannot be read or written."""

    exit_code = 3


class DataError(LightAKEError):
    """Raised when input data is unusable for the requested operation."""

    exit_code = 4


class EmptyCorpusError(DataError):
    """Raised when a corpus directory holds no stories."""

    pass


class MissingGoldError(DataError):
    """Raised when gold keyphrases are required but absent."""

    pass


class NoPositivesError(DataError):
    """Raised when no candidate matches any gold keyphrase."""

    pass


class SingleClassError(DataError):
    """Raised when training data contains only one class."""

    pass


class ModelError(LightAKEError):
    """Raised when a model cannot be used as requested."""

    exit_code = 5


class SchemaMismatchError(ModelError):
    """Raised when a model's feature schema differs from the running code."""

    pass


class TrainingCrMismatchError(ModelError):
    """Raised when a model is applied at a CR other than the one it was trained with."""

    pass


class MissingModelError(ModelError):
    """Raised when a sweep lacks a model for one of its compression ratios."""

    pass
