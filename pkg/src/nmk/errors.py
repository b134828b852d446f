"""Exception types raised across the package.

Every error derives from :class:`NmkError` so callers (and the CLI) can
catch library failures in one place.  Validation errors carry the name of
the violated invariant in ``invariant`` so file readers can emit a
diagnostic naming it.
"""


class NmkError(Exception):
    """Base class for all library errors."""


class InvariantViolation(NmkError):
    """A state/channel invariant failed validation."""

    def __init__(self, invariant, message):
        self.invariant = invariant
        super().__init__(f"{invariant}: {message}")


class DuplicateLabel(NmkError):
    pass


class UnknownLabel(NmkError):
    pass


class LayoutMismatch(NmkError):
    pass


class DimensionMismatch(NmkError):
    pass


class BadDims(NmkError):
    pass


class OverlappingPartition(NmkError):
    pass


class InconsistentDims(NmkError):
    pass


class BadProbabilities(NmkError):
    pass


class IrreversibleEveOp(NmkError):
    pass


class NotClassicalRegister(NmkError):
    pass


class DimensionTooSmall(NmkError):
    pass


class BudgetExceeded(NmkError):
    pass


class BadMu(NmkError):
    pass


class BadRange(NmkError):
    pass


class LayoutClash(NmkError):
    pass


class BadEnsemble(NmkError):
    pass


class UnknownName(NmkError):
    pass


class BadParams(NmkError):
    pass
