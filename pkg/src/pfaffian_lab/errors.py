"""Exception types shared across the package."""


class PfaffianLabError(Exception):
    """Base class for all errors raised by pfaffian_lab."""


class OddDimension(PfaffianLabError, ValueError):
    pass


class DimensionTooLarge(PfaffianLabError, ValueError):
    pass


class DimensionMismatch(PfaffianLabError, ValueError):
    pass


class IndexOutOfRange(PfaffianLabError, IndexError):
    pass


class NotSkewSymmetric(PfaffianLabError, ValueError):
    pass


class NonpositiveTime(PfaffianLabError, ValueError):
    pass


class UnorderedPoints(PfaffianLabError, ValueError):
    pass


class UnorderedArguments(UnorderedPoints):
    pass


class DegeneratePoints(PfaffianLabError, ValueError):
    pass


class UnsupportedPatternModelCombination(PfaffianLabError, ValueError):
    pass


class QuadratureNonConvergence(PfaffianLabError, RuntimeError):
    pass


class EmptyWindow(PfaffianLabError, ValueError):
    pass


class NonpositiveStep(PfaffianLabError, ValueError):
    pass


class InvalidProbability(PfaffianLabError, ValueError):
    pass


class NoReplicates(PfaffianLabError, ValueError):
    pass


class OddCount(PfaffianLabError, ValueError):
    pass


class InsufficientBuffer(PfaffianLabError, ValueError):
    pass


class InsufficientStatistics(PfaffianLabError, ValueError):
    pass


class EigensolverFailure(PfaffianLabError, RuntimeError):
    pass


class ConfigError(PfaffianLabError, ValueError):
    pass
