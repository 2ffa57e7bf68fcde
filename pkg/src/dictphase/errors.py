"""Exception hierarchy shared by all dictphase modules."""


class DictPhaseError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(DictPhaseError, ValueError):
    """Operand shapes do not agree."""


class BudgetExceeded(DictPhaseError):
    """An exhaustive enumeration would exceed its configured budget."""

    def __init__(self, what, needed, budget):
        self.what = what
        self.needed = needed
        self.budget = budget
        super().__init__(f"{what}: {needed} cases exceed budget {budget}")


class InfeasibleError(DictPhaseError):
    """The constraint set of a convex subproblem is numerically empty."""


class DomainError(DictPhaseError, ValueError):
    """Arguments lie outside the domain where a formula is meaningful."""


class PreconditionError(DictPhaseError):
    """A named precondition clause failed verification.

    ``clause`` identifies which check failed so callers can report it
    without parsing the message.
    """

    def __init__(self, clause, detail=""):
        self.clause = clause
        self.detail = detail
        msg = clause if not detail else f"{clause}: {detail}"
        super().__init__(msg)


class MembershipError(PreconditionError):
    """A vector is not in the set an operation requires."""
