"""Exception hierarchy shared by all zcal modules."""


class ZcalError(Exception):
    """Base class for every error raised by zcal."""


class FormatError(ZcalError):
    """An input file does not parse as the expected format."""


class ValidationError(ZcalError, ValueError):
    """Parsed data violates a domain invariant."""


class DomainError(ZcalError, ValueError):
    """A function was called outside its mathematical domain."""


class ProtocolError(ZcalError):
    """The active-learning protocol was violated (double labeling, missing predictions, adapter failure)."""


class ConfigError(ZcalError, ValueError):
    """An experiment configuration is invalid."""
