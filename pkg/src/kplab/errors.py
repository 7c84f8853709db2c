"""Exception hierarchy shared by every kplab module."""


class KplabError(Exception):
    """Base class for all errors raised by kplab."""


class ConfigurationError(KplabError, ValueError):
    """Inputs are inconsistent with each other (grid sizes, strip endpoints, ...)."""


class DomainError(KplabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalRegimeError(KplabError, RuntimeError):
    """The computation is well posed but the numbers cannot be trusted."""


class UnobservableError(NumericalRegimeError):
    """Gramian too ill-conditioned: numerically unobservable at this truncation."""


class InstabilityError(NumericalRegimeError):
    """Time stepper produced NaN or overflow."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ContractionError(NumericalRegimeError):
    """Picard iteration left the contraction regime."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
