"""Exception hierarchy shared by every trustmarket module."""


class TrustMarketError(Exception):
    """Base class for all package errors."""


class InputError(TrustMarketError):
    """An input stream could not be read at all."""


class SchemaError(TrustMarketError):
    """A single record does not match its documented schema."""


class ZeekFormatError(InputError):
    """A Zeek log file is structurally unusable (no header, wrong kind)."""


class ValidationError(TrustMarketError, ValueError):
    """A value violates a domain-type invariant."""


class ContractError(TrustMarketError, ValueError):
    """A caller broke an operation precondition."""


class StorageError(TrustMarketError):
    """A persisted file is unreadable or corrupt."""


class SelectionError(TrustMarketError, LookupError):
    """The chosen offer is not part of the ranked list."""


class ConfigError(TrustMarketError):
    """A configuration value is missing, unknown or out of range."""
