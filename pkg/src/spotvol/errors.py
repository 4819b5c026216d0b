"""Exception hierarchy.

Every error maps onto one CLI exit code through its base class:
``ConfigError`` -> 2, ``DataError`` -> 3, ``NumericalError`` -> 4.
"""


class SpotVolError(Exception):
    exit_code = 1


class ConfigError(SpotVolError, ValueError):
    exit_code = 2


class DataError(SpotVolError, ValueError):
    exit_code = 3


class NumericalError(SpotVolError, ArithmeticError):
    exit_code = 4


# kernels
class NotAntisymmetric(ConfigError):
    pass


class DegenerateKernel(ConfigError):
    pass


class InvalidDomain(ConfigError):
    pass


class BadBlockCount(ConfigError):
    pass


# simulation
class BadRefinement(ConfigError):
    pass


class NonPositiveVol(NumericalError):
    pass


# wavelets
class LevelTooFine(ConfigError):
    pass


class GridTooCoarse(DataError):
    pass


class BadExponent(ConfigError):
    pass


# estimator
class LevelExceedsBlocks(ConfigError):
    pass


class ConfigInconsistent(ConfigError):
    pass


class NegativeThreshold(ConfigError):
    pass


class NonUniformGrid(DataError):
    pass


# rate harness
class SmoothnessTooLow(ConfigError):
    pass


class GridMismatch(DataError):
    pass
