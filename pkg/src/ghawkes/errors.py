"""Exception types. Each maps to a CLI exit code."""


class GHawkesError(Exception):
    exit_code = 1


class ConfigError(GHawkesError, ValueError):
    exit_code = 2


class ModelError(GHawkesError, ValueError):
    exit_code = 2


class AssumptionError(GHawkesError):
    """A stability or boundedness assumption required by the operation fails."""

    exit_code = 3


class UnsupportedConfigurationError(AssumptionError):
    pass


class NumericError(GHawkesError, ArithmeticError):
    exit_code = 4


class InstabilityError(NumericError):
    pass


class DominationError(NumericError):
    """The thinning bound was exceeded; this is a bug, never a user error."""
