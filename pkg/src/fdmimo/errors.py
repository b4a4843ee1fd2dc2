"""Exception types; each maps to a CLI exit code."""


class FdmimoError(Exception):
    exit_code = 1


class ValidationError(FdmimoError, ValueError):
    """Bad configuration or violated input invariant."""

    exit_code = 3


class DomainError(ValidationError):
    """Argument outside the domain of a formula (d <= 0, C <= 0, trials = 0)."""


class ContractError(FdmimoError, ValueError):
    """Inputs that do not fit together (shapes, mismatched configs)."""

    exit_code = 3


class SingularityError(FdmimoError, ArithmeticError):
    """Gram matrix rank deficient or too ill-conditioned to invert."""

    exit_code = 5
