"""Exception hierarchy shared by all pesinlab modules."""


class PesinLabError(Exception):
    """Base class for every error raised by pesinlab."""


class ConstructionError(PesinLabError, ValueError):
    """An object could not be built from the given parameters."""


class DegenerateInterval(ConstructionError):
    pass


class RatioInfeasible(ConstructionError):
    pass


class OutOfDomain(PesinLabError, ValueError):
    pass


class ValidationError(PesinLabError):
    """A constructed map fails one of its structural checks."""


class NotC0(ValidationError):
    pass


class NotC1(ValidationError):
    pass


class NotExpanding(ValidationError):
    pass


class ParamsInfeasible(ConstructionError):
    pass


class GapOverflow(ConstructionError):
    pass


class WordTooLong(PesinLabError, ValueError):
    pass


class GapRatioError(ConstructionError):
    pass


class GlueRatioError(ConstructionError):
    pass


class ConjugacyViolation(ValidationError):
    def __init__(self, message, words=()):
        super().__init__(message)
        self.words = list(words)


class DomainMismatch(PesinLabError, ValueError):
    pass


class UnsupportedVariant(PesinLabError, TypeError):
    pass


class DepthExceeded(PesinLabError, ValueError):
    pass


class AllZeroFractions(PesinLabError):
    pass


class ConfigError(PesinLabError):
    pass


class UndersampledWarning(UserWarning):
    """Raised as a warning when a cylinder table has too few samples per word."""
