"""Exception types raised by the toolkit."""


class MPGKError(Exception):
    """Base class for all errors raised by mpgk."""


class ParameterError(MPGKError, ValueError):
    """An argument is outside its allowed range."""


class ConfigurationError(MPGKError, ValueError):
    """The requested computation does not fit the available data."""


class FormatError(MPGKError, ValueError):
    """A dataset file is malformed."""


class ContractError(MPGKError, ValueError):
    """An input violates a documented precondition."""


class DegenerateError(MPGKError, ArithmeticError):
    """A numerical quantity is degenerate (zero norm, single class, ...)."""
