"""Exception hierarchy.

Every library error derives from SadaError so callers (and the CLI) can map
input/usage problems to a single exit code.
"""


class SadaError(Exception):
    """Base class for all library errors."""


# --- corpus storage ---------------------------------------------------------


class MissingFile(SadaError):
    pass


class ManifestSchemaError(SadaError):
    pass


class ShapeMismatch(SadaError):
    pass


class NonFiniteValue(SadaError):
    pass


class IoError(SadaError):
    pass


class KTooLarge(SadaError):
    pass


class KTooSmall(SadaError):
    pass


# --- covariance engine ------------------------------------------------------


class TooFewSamples(SadaError):
    pass


class SingularConditioningBlock(SadaError):
    pass


class NotComputed(SadaError):
    pass


# --- augmentation & losses --------------------------------------------------


class DimMismatch(SadaError):
    pass


class StepsTooSmall(SadaError):
    pass


class ZeroVector(SadaError):
    pass


class DegenerateShift(SadaError):
    pass


class NonPositiveVariance(SadaError):
    pass


# --- testbed ----------------------------------------------------------------


class BadConfig(SadaError):
    pass


class TooFewSeeds(SadaError):
    pass


class RankDeficientEncoder(SadaError):
    pass


class TooFewPairs(SadaError):
    pass
