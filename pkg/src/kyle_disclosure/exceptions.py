class ModelDomainError(ValueError):
    """Parameters outside the region where the linear equilibrium exists."""


class NumericalError(ArithmeticError):
    """A recursion produced a state the model cannot reach (e.g. negative variance)."""
