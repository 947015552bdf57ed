"""Exception types shared across the package."""


class SoficlabError(Exception):
    """Base class for all package errors."""


class ValidationError(SoficlabError):
    """An input object or experiment spec violates its contract."""


class UnsupportedElementError(SoficlabError):
    """A group element is outside a declared finite support.

    Carries the offending element so callers can report it by name.
    """

    def __init__(self, element, context: str = ""):
        self.element = element
        msg = f"element {element} outside declared support"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class BudgetExceededError(SoficlabError):
    """An enumeration would exceed its point budget.

    ``required`` is the budget that would have been needed.
    """

    def __init__(self, required: int, budget: int, what: str = "enumeration"):
        self.required = required
        self.budget = budget
        super().__init__(f"{what} needs {required} points, budget is {budget}")


class SingularMatrixError(SoficlabError):
    """A determinant-based operation met a singular integer matrix."""
