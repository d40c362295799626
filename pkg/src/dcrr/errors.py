"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value (bad dimension, penalty parameter, ...)."""


class IngestionError(ValueError):
    """CSV ingestion produced no usable data."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class ProtocolError(RuntimeError):
    """Malformed frame or dimension mismatch on the wire."""


class AggregationError(RuntimeError):
    """A worker failed or disconnected during a broadcast/gather round."""


class SelectionError(RuntimeError):
    """No admissible model on the tuning grid."""
