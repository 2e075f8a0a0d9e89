"""Exception hierarchy shared by all modules."""


class RuelleLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidMap(RuelleLabError, ValueError):
    pass


class RootSolveFailure(RuelleLabError):
    pass


class CriticalFiber(RuelleLabError):
    """The target lies too close to a critical value; the fiber is not simple."""


class CriticalPoint(RuelleLabError):
    """|R'(z)| fell below tolerance where a regular point was required."""


class PoleHit(RuelleLabError):
    pass


class BudgetExceeded(RuelleLabError):
    pass


class OutsideDomain(RuelleLabError, ValueError):
    pass


class NotIntegrable(RuelleLabError):
    pass


class DegenerateInvariants(RuelleLabError, ValueError):
    pass


class BadPointCount(RuelleLabError, ValueError):
    pass


class UnresolvedPostcritical(RuelleLabError):
    pass


class NotApplicable(RuelleLabError):
    """Raised when an experiment has nothing to measure (e.g. no quadratic differentials)."""


class IndexOutOfRange(RuelleLabError, IndexError):
    pass
