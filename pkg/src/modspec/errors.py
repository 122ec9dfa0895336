"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: configuration/usage problems exit 1,
runtime numerical failures exit 2.
"""


class ModspecError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ModspecError):
    """Invalid configuration, arguments, or input metadata (wrong sample rate, bad dims)."""


class EmptyInputError(ModspecError):
    """An operation received an empty signal or corpus."""


class ShortUtteranceError(ModspecError):
    """Utterance too short to host a full analysis window in training mode (skip signal)."""


class SequenceError(ModspecError):
    """Window blocks out of order or missing during overlap-add."""


class NumericalError(ModspecError):
    """Non-finite values where finite ones are required."""


class LengthError(ModspecError):
    """Input exceeds the model's maximum frame count."""


class FormatError(ModspecError):
    """Malformed binary file: bad magic, version, truncation, or shape mismatch."""


class DivergenceError(ModspecError):
    """Training loss became non-finite."""
