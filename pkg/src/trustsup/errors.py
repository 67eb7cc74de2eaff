"""Exception types shared across the package, mapped to CLI exit codes."""


class TrustsupError(Exception):
    """Base class for all package errors."""


class ConfigError(TrustsupError):
    """Invalid experiment configuration: unknown key, bad value. Exit code 2."""


class DataFormatError(TrustsupError):
    """Malformed or incompatible dataset / artifact. Exit code 3."""


class NumericError(TrustsupError):
    """Shape mismatch or non-finite value in a numeric routine. Exit code 4."""
