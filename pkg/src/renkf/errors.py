"""Exception hierarchy.

Every error raised on purpose by the package derives from ``RenkfError``
so callers can catch the whole family at once.
"""


class RenkfError(Exception):
    pass


class InvalidEnsembleSize(RenkfError, ValueError):
    pass


class InvalidSpread(RenkfError, ValueError):
    pass


class InvalidInflation(RenkfError, ValueError):
    pass


class NonFiniteState(RenkfError, FloatingPointError):
    pass


class IntegrationBlowup(RenkfError, FloatingPointError):
    pass


class InvalidGrid(RenkfError, ValueError):
    pass


class DelayExceedsHistory(RenkfError, ValueError):
    pass


class InvalidLocation(RenkfError, ValueError):
    pass


class NonFiniteInput(RenkfError, ValueError):
    pass


class WashoutRequired(RenkfError, ValueError):
    pass


class TrainingFailure(RenkfError, RuntimeError):
    pass


class InvalidDataset(RenkfError, ValueError):
    pass


class JacobianUndefined(RenkfError, ValueError):
    pass


class InvalidCovariance(RenkfError, ValueError):
    pass


class AnalysisFailure(RenkfError, RuntimeError):
    pass


class InvalidNoise(RenkfError, ValueError):
    pass


class TruthGenerationFailure(RenkfError, RuntimeError):
    pass


class InsufficientWashoutData(RenkfError, ValueError):
    pass


class InvalidWindow(RenkfError, ValueError):
    pass


class InvalidConfig(RenkfError, ValueError):
    pass


class StageError(RenkfError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


class DimensionMismatch(InvalidConfig):
    """A saved network does not match the observables of the configured model."""
