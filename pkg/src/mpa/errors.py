"""Exception types shared across the package."""


class MpaError(Exception):
    """Base class for library errors."""


class DomainError(MpaError, ValueError):
    """Argument outside the mathematical domain of a routine."""


class AccuracyError(MpaError, ArithmeticError):
    """Requested accuracy was not reached within the iteration budget."""


class RegimeWarning(UserWarning):
    """A formula is being used outside the parameter range it was built for."""
