"""Exception hierarchy for tvbar.

Every domain error derives from :class:`TVBarError` so the CLI can map the
whole family onto one exit code.
"""


class TVBarError(Exception):
    """Base class for domain errors."""


class EmptyBarCode(TVBarError, ValueError):
    pass


class InfeasibleXDimension(TVBarError, ValueError):
    pass


class InvalidBarCode(TVBarError, ValueError):
    pass


class QuadratureFailure(TVBarError, RuntimeError):
    pass


class GridTooSmall(TVBarError, ValueError):
    pass


class CaseOrderingViolated(TVBarError, ValueError):
    pass


class IncompatibleSignals(TVBarError, ValueError):
    pass


class OutOfLemmaScope(TVBarError, ValueError):
    pass


class SearchBudgetExceeded(TVBarError, RuntimeError):
    pass


class Diverged(TVBarError, RuntimeError):
    pass
