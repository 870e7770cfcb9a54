"""Exception hierarchy shared by all remlab modules."""


class RemlabError(Exception):
    """Base class for every error raised by remlab."""


class SpecViolation(RemlabError):
    """A field distribution fails the regularity assumption."""


class NonFiniteMoment(RemlabError):
    """A required absolute moment of the field distribution is infinite."""


class QuadratureFailure(RemlabError):
    """Adaptive quadrature could not reach the requested tolerance."""


class OutOfRange(RemlabError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NoConvergence(RemlabError):
    """A root solver exhausted its iteration budget."""


class NoRootInBracket(RemlabError):
    """The coupled equation has no sign change inside its bracket.

    ``f_lo`` and ``f_hi`` hold the residual at both bracket ends.
    """

    def __init__(self, message, f_lo=None, f_hi=None):
        super().__init__(message)
        self.f_lo = f_lo
        self.f_hi = f_hi


class TooLarge(RemlabError):
    """The requested enumeration exceeds the 2**26 configuration budget."""


class InsufficientData(RemlabError):
    """Too few samples or realizations for the requested statistic."""


class MissingOutput(RemlabError):
    """A manifest refers to outputs that do not exist."""


class ConfigError(RemlabError, ValueError):
    """An experiment configuration failed validation."""
