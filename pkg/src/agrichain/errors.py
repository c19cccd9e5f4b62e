"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AgrichainError(Exception):
    """Base class for every error raised by agrichain."""


class ConvergenceError(AgrichainError):
    """An iterative routine hit its step cap before converging."""


class DegenerateDataError(AgrichainError, ValueError):
    """Input data cannot identify the requested quantity."""


class OutOfRangeError(AgrichainError, ValueError):
    pass


class ShapeMismatchError(AgrichainError, ValueError):
    pass


class AuthenticationError(AgrichainError):
    """Sealed payload failed authenticated decryption (tampering or wrong key)."""


class MalformedKeyError(AgrichainError, ValueError):
    pass


class NonceExhaustedError(AgrichainError):
    pass


class CorruptLedgerError(AgrichainError):
    """A ledger failed validation or its records could not be decoded."""


class LedgerParseError(CorruptLedgerError):
    pass


class ConfigError(AgrichainError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
