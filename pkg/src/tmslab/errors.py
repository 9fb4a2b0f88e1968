"""Exception types shared by the labs."""


class ParameterError(ValueError):
    """Invalid construction parameters (bounds, counts, masses)."""


class DomainError(ValueError):
    """Argument outside the domain where a function is defined."""


class NumericalFailure(RuntimeError):
    """A numerical contract (positivity, convergence) was violated."""


class FitFailure(RuntimeError):
    """A least-squares fit did not reach the asymptotic regime."""


class NotBracketedError(RuntimeError):
    """A scan did not find the sign change it was asked to locate."""


class SectorMismatch(ValueError):
    """Two charges from different angular sectors were combined."""
