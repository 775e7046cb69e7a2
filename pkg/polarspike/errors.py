"""
Exceptions raised by polarspike.

All of them are ValueError subclasses except TrainingError, so callers that only
care about "bad input" can keep catching ValueError.
"""


class PolarSpikeError(Exception):
    """Base class of every error the command line reports with exit code 1."""


class DimensionError(PolarSpikeError, ValueError):
    """Tensor shapes don't fit together."""


class NumericError(PolarSpikeError, ValueError):
    """A value left the finite real domain (NaN, Inf, var + eps <= 0)."""


class QuantParamsError(PolarSpikeError, ValueError):
    """
    A quantizer or neuron parameter constraint was violated.

    `constraint` names the failed constraint, e.g. "alpha_range".
    """
    def __init__(self, constraint: str, message: str) -> None:
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class StructureError(PolarSpikeError, ValueError):
    """A model doesn't have the layer structure an operation needs."""


class ConfigError(PolarSpikeError, ValueError):
    """A command flag or configuration value is out of range."""


class ModelFileError(PolarSpikeError, ValueError):
    """A model or report file is malformed or has an unsupported version."""


class TrainingError(PolarSpikeError, RuntimeError):
    """Training diverged."""
