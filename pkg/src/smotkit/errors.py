"""Exception types shared across the package."""


class SmotError(Exception):
    """Base class for all package errors."""


class ValidationError(SmotError):
    """Bad input data or configuration (malformed files, invalid values)."""


class PairingError(SmotError):
    """Ground truth and predictions cannot be matched up sequence by sequence."""
