"""Exception types shared across the toolkit."""


class PnpsrError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PnpsrError, ValueError):
    """Input violates a documented invariant (bad dims, bad values, bad config)."""


class FormatError(PnpsrError, ValueError):
    """A file does not conform to its declared on-disk format."""
