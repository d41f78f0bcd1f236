"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A model parameter or configuration value is out of its valid range."""


class ContractError(RuntimeError):
    """An operation was called with its preconditions violated (stale state)."""


class StateCorruptionError(RuntimeError):
    """The system demand bookkeeping reached an impossible value."""


class InfeasibleHouseholdError(RuntimeError):
    """No baseline schedule keeps the household inside its temperature bounds."""


class EnumerationTooLargeError(ValueError):
    """Brute-force enumeration was requested on an instance that is too big."""


class CostAuditError(AssertionError):
    """A demand shift failed to lower total cost by the guaranteed amount."""


class MetricsError(ValueError):
    """Metrics were requested without the inputs they are defined against."""
