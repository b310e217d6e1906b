"""Exception hierarchy shared by every module."""


class PIRError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PIRError, ValueError):
    """Parameters outside the domain of a formula or protocol step."""


class NonUniformError(DomainError):
    """The scheme only supports uniform prefetching (M divisible by N)."""


class PlanError(PIRError, ValueError):
    """A prefetch plan violates disjointness, range or size constraints."""


class InternalError(PIRError, RuntimeError):
    """A self-check of generated structure failed."""


class BudgetError(PIRError, ValueError):
    """An audit grid exceeds its enumeration budget."""


# field and code errors
class WidthError(PIRError, ValueError):
    pass


class LengthError(PIRError, ValueError):
    pass


class PositionError(PIRError, ValueError):
    pass


class SingularError(PIRError, ArithmeticError):
    pass


# engine errors
class DimensionError(PIRError, ValueError):
    pass


class ReconstructError(PIRError, RuntimeError):
    pass


class PeelError(PIRError, RuntimeError):
    """Side-information cancellation failed: the query table is malformed."""
