"""Exception types shared across the package."""


class MpcnError(Exception):
    """Base class for all package errors."""


class DomainError(MpcnError, ValueError):
    """A parameter is outside the domain of the requested function."""


class StateError(MpcnError, ValueError):
    """A chain state is invalid for the attached kernel (e.g. x = 0 for MpCN)."""


class DegenerateInputError(MpcnError, ValueError):
    """Series too short or with zero variance."""


class NumericalError(MpcnError, ArithmeticError):
    """Quadrature or simulation failed to produce a finite answer."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigError(MpcnError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
