"""Exception hierarchy shared by the library and the CLI."""


class DeltaVarError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DeltaVarError, ValueError):
    """Invalid input to a constructor or operation."""


class HypothesisViolation(ValidationError):
    """A grid whose forward jump is not affine, sigma(t) != a1*t + a0."""


class ProblemSizeError(ValidationError):
    """The grid is too short for the requested order or truncation."""


class ExprSyntaxError(DeltaVarError, ValueError):
    """Malformed Lagrangian expression text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class EvalDomainError(DeltaVarError, ArithmeticError):
    """log/sqrt/division/power evaluated outside its real domain."""

    def __init__(self, message: str, subexpr: str = "", index=None):
        detail = message
        if subexpr:
            detail += f" in '{subexpr}'"
        if index is not None:
            detail += f" at grid index {index}"
        super().__init__(detail)
        self.subexpr = subexpr
        self.index = index


class SolverDivergenceError(DeltaVarError, RuntimeError):
    """The line search produced no finite trial point."""
