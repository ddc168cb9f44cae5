"""Exception types shared across the package."""


class TasTasError(Exception):
    """Base class for all package errors."""


class ConfigError(TasTasError, ValueError):
    """Invalid configuration: bad shapes, incompatible op attributes, bad presets."""


class AudioIOError(TasTasError, IOError):
    """Unreadable, truncated, or unsupported audio files."""


class DataError(TasTasError, ValueError):
    """Malformed manifests, empty corpora, degenerate signals."""


class NonFiniteGradientError(TasTasError, RuntimeError):
    """A gradient contained NaN/Inf; carries the offending parameter path."""

    def __init__(self, param_path: str):
        super().__init__(f"non-finite gradient for parameter '{param_path}'")
        self.param_path = param_path


class CheckpointError(TasTasError, ValueError):
    """Corrupt or incompatible checkpoint container."""
