"""Exception hierarchy shared across the package."""


class ProtestLensError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ProtestLensError, ValueError):
    pass


class ParameterError(ProtestLensError, ValueError):
    pass


class NumericError(ProtestLensError, FloatingPointError):
    pass


class GraphStateError(ProtestLensError, RuntimeError):
    pass


class TargetIndexError(ProtestLensError, IndexError):
    pass


class VocabularyError(ProtestLensError, IndexError):
    pass


class LengthError(ProtestLensError, ValueError):
    pass


class ConfigError(ProtestLensError, ValueError):
    pass


class DecodeError(ProtestLensError, ValueError):
    pass


class StratificationError(ProtestLensError, ValueError):
    pass


class IntegrityError(ProtestLensError, ValueError):
    """Checkpoint bytes do not match the declared layout."""


class IncompatibleCheckpointError(IntegrityError):
    pass


class TrainingError(ProtestLensError, RuntimeError):
    pass
