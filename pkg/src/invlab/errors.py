"""Exception types shared by every module."""


class DomainError(ValueError):
    """Input outside the domain of an operation (unbound variable, bad name, ...)."""


class ContractError(RuntimeError):
    """A caller violated a documented precondition."""


class ResourceError(RuntimeError):
    """The request exceeds the explicit-state limits of this package."""


class BudgetExhausted(Exception):
    """Raised by a ledger when a query would exceed the configured budget."""

    def __init__(self, counter: str, limit: int):
        super().__init__(f"{counter} budget of {limit} exhausted")
        self.counter = counter
        self.limit = limit
