"""Exception types shared across the package."""


class CapExceeded(ValueError):
    """A degree or order cap would be exceeded by the requested computation."""

    def __init__(self, message, cap=None, value=None):
        super().__init__(message)
        self.cap = cap
        self.value = value


class BudgetExceeded(RuntimeError):
    """An enumeration would visit more pairings than the configured budget."""

    def __init__(self, message, budget=None, size=None):
        super().__init__(message)
        self.budget = budget
        self.size = size
