"""Exception types raised by nlmetro."""


class NlmetroError(Exception):
    """Base class for all package errors."""


class DimensionError(NlmetroError, ValueError):
    """States or operators live on different truncated spaces."""


class TruncationError(NlmetroError, ValueError):
    """Probability beyond the Fock cutoff exceeds the permitted tail."""

    def __init__(self, message, *, cutoff=None, tail=None):
        super().__init__(message)
        self.cutoff = cutoff
        self.tail = tail


class UndefinedStateError(NlmetroError, ValueError):
    """Requested state has no normalizable representative (e.g. odd cat at alpha=0)."""


class PreparationError(NlmetroError, ValueError):
    """Conditional preparation has zero success weight."""


class InfeasibleTargetError(NlmetroError, ValueError):
    """No state parameter reaches the requested mean photon number."""


class NotAntisymmetricError(NlmetroError, ValueError):
    pass


class ConvergenceError(NlmetroError, RuntimeError):
    """A series or root search did not converge within its budget."""


class PropertyViolation(NlmetroError, AssertionError):
    """A checked physical property (ordering, dominance) failed."""
