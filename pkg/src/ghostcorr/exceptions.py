"""Exception hierarchy shared by all ghostcorr modules."""


class GhostCorrError(Exception):
    """Base class for every error raised by ghostcorr."""


class DomainMismatchError(GhostCorrError, ValueError):
    """A field was passed in the wrong (position/momentum) domain."""


class CompatibilityError(GhostCorrError, ValueError):
    """Two fields do not share grid, domain or statistical ordering."""


class ParameterError(GhostCorrError, ValueError):
    """A physical parameter violates its invariant."""


class ConfigurationError(GhostCorrError, ValueError):
    """An optical arm or experiment configuration is inconsistent."""


class InsufficientDataError(GhostCorrError, ValueError):
    """Too few shots were accumulated to form the requested estimate."""


class UndefinedCorrelationError(GhostCorrError, ArithmeticError):
    """Normalized correlation requested while a variance is zero."""


class TruncationError(GhostCorrError, ValueError):
    """Fock-space truncation discards more probability than allowed."""
