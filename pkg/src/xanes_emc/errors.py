"""Exception types raised across the package."""


class XanesEmcError(Exception):
    """Base class for all errors raised by xanes_emc."""


class InvalidInputError(XanesEmcError, ValueError):
    pass


class ConfigError(XanesEmcError, ValueError):
    pass


class DegenerateInputError(XanesEmcError, ValueError):
    pass


class InsufficientSamplesError(XanesEmcError, ValueError):
    pass


class DomainError(XanesEmcError, ValueError):
    pass


class ParseError(XanesEmcError, ValueError):
    """Malformed input file. ``line`` is 1-based and counts the header."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
