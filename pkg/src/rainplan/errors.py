"""Exception hierarchy shared by all rainplan modules."""


class RainError(Exception):
    """Base class for every error raised by rainplan."""


# set functions
class SingletonZero(RainError, ValueError):
    pass


class MonotoneViolation(RainError, ValueError):
    pass


class CurvatureOutOfRange(RainError, ValueError):
    pass


class GroundSetTooLarge(RainError, ValueError):
    pass


class DegenerateDenominator(RainError, ArithmeticError):
    pass


class TooManySubsets(RainError, ValueError):
    pass


class SearchSpaceTooLarge(RainError, ValueError):
    pass


# sensing / estimation
class TargetAtSensor(RainError, ArithmeticError):
    pass


class DimensionMismatch(RainError, ValueError):
    pass


class SingularInnovation(RainError, ArithmeticError):
    pass


class PoseOutsideGrid(RainError, ValueError):
    pass


# configuration / reporting
class ConfigInvalid(RainError, ValueError):
    pass


class EmptyTrace(RainError, ValueError):
    pass


class EmptyTable(RainError, ValueError):
    pass
