"""Shared exception types."""


class CodecError(Exception):
    """Base class for wire-format failures."""


class TruncationError(CodecError):
    """The bit stream ended in the middle of a code word."""


class CorruptionError(CodecError):
    """The bit stream decoded to something structurally impossible."""


class DivergenceError(RuntimeError):
    """An optimization run produced NaN/Inf or ran away."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(ValueError):
    """Invalid run or quantizer configuration."""
