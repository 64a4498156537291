"""Exception hierarchy shared by all zermelo modules."""


class ZermeloError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteEvaluation(ZermeloError, ArithmeticError):
    pass


class DomainViolation(ZermeloError, ValueError):
    pass


class DegenerateTensor(ZermeloError, ArithmeticError):
    pass


class KindViolation(ZermeloError, TypeError):
    pass


class NavigationRegimeViolation(ZermeloError, ValueError):
    pass


class PreConeViolation(ZermeloError, ValueError):
    pass


class ConeViolation(ZermeloError, ValueError):
    pass


class NewtonDivergence(ZermeloError, ArithmeticError):
    pass


class LegendreOutOfRange(ZermeloError, ValueError):
    pass


class HypothesisViolation(ZermeloError, ValueError):
    pass


class FlowEscape(ZermeloError, ValueError):
    pass


class DomainExit(ZermeloError):
    """A trajectory left the admissible domain.

    ``exit_time`` is the time of the first failing substep (no interpolation).
    """

    def __init__(self, message, exit_time):
        super().__init__(message)
        self.exit_time = float(exit_time)


class RootNotBracketed(ZermeloError, ValueError):
    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = tuple(interval)


class ConfigError(ZermeloError, ValueError):
    pass


class EmptyLevelSet(ZermeloError, ValueError):
    pass
