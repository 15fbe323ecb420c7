"""Exception hierarchy shared by every module."""


class TreexpError(Exception):
    """Base class for all library errors."""


class StructuralError(TreexpError, ValueError):
    """A graph, tree or edge function violates a structural invariant."""


class SizeError(TreexpError, ValueError):
    """Input exceeds the brute-force enumeration bound."""


class DimensionError(TreexpError, ValueError):
    """Array shapes are inconsistent (e.g. a non-square matrix)."""


class SingularError(TreexpError, ArithmeticError):
    """The Laplacian is singular, i.e. Z = 0 and nothing can be normalized."""


class NumericalError(TreexpError, ArithmeticError):
    """A quantity that must be non-negative came out clearly negative."""


class SupportError(TreexpError, ValueError):
    """p puts mass on a tree that q gives zero weight (KL is infinite)."""


class DomainError(TreexpError, ValueError):
    """A scalar parameter is outside the domain of the requested quantity."""
