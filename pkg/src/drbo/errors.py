"""Exception types shared across the package."""


class DrboError(Exception):
    """Base class for package errors."""


class ConfigurationError(DrboError):
    """Invalid user-supplied configuration (bad names, shapes, empty boxes)."""


class DomainError(DrboError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(DrboError):
    """Linear-algebra failure that survived the jitter escalation policy."""
