"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input data or arguments (CLI exit code 1)."""


class ParseError(ValidationError):
    """Malformed interchange file; message cites the offending line/record."""


class IndexFormatError(ValidationError):
    """Corrupt, truncated or version-incompatible index container."""
