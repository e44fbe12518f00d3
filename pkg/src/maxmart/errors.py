"""Semantic exception hierarchy.

All validation failures raise subclasses of :class:`MaxmartError` so callers
(and the CLI) can map them to exit codes without string matching.
"""


class MaxmartError(ValueError):
    """Base class for all maxmart errors."""


class ValidationError(MaxmartError):
    """Malformed input object (bad weights, unsorted grid, bad spec...)."""


class DomainError(MaxmartError):
    """Argument outside the mathematical domain of an operation."""


class IntegrabilityError(MaxmartError):
    """A required tail integral diverges."""


class ConstraintError(MaxmartError):
    """A path violates a structural constraint (e.g. drawdown) where it must not.

    Carries the offending grid index in ``index`` when applicable.
    """

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class NoSolutionError(MaxmartError):
    """The posed problem has no solution (e.g. empty feasible set)."""
