"""Exception hierarchy shared by every module.

Each class name doubles as the machine-readable error code that the CLI
reports, so renaming one is a breaking change.
"""


class MMError(Exception):
    """Base class for all library errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class ValidationError(MMError, ValueError):
    pass


class AsymmetricMatrix(ValidationError):
    pass


class TriangleViolation(ValidationError):
    pass


class NonProbabilityWeights(ValidationError):
    pass


class NonpositiveWeight(ValidationError):
    pass


class DuplicateZeroDistance(ValidationError):
    pass


class ParseError(MMError, ValueError):
    pass


class BadParam(MMError, ValueError):
    pass


class NonpositiveScale(BadParam):
    pass


class AlphaOutOfRange(BadParam):
    pass


class KappaOutOfRange(BadParam):
    pass


class BadKappas(BadParam):
    pass


class BadRadius(BadParam):
    pass


class BadTuple(BadParam):
    pass


class BadBudget(BadParam):
    pass


class GridTooCoarse(BadParam):
    pass


class InsufficientSweep(BadParam):
    pass


class TooLarge(MMError):
    pass


class SupportExplosion(TooLarge):
    pass


class Unsupported(MMError):
    pass


class DegenerateBase(MMError):
    pass


class NotLipschitzOnSubset(MMError):
    def __init__(self, message: str, pair=None):
        super().__init__(message)
        self.pair = pair
