"""Exception hierarchy shared across the package."""


class FedledgerError(Exception):
    """Base class for all package errors."""


class DimensionError(FedledgerError):
    """Feature-vector dimensionality does not match the model or payload."""


class EmptyModelError(FedledgerError):
    """Operation requires at least one prototype in the buffer."""


class ArgumentError(FedledgerError):
    """Caller passed structurally invalid arguments."""


class InsufficientSharesError(FedledgerError):
    """Fewer surviving shares than the reconstruction threshold."""


class ParseError(FedledgerError):
    """Malformed dataset row.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigError(FedledgerError):
    """Invalid experiment configuration.  Carries the offending field path."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


# Ledger revert reasons.  A reverted transaction still charges gas; these are
# recorded on the receipt (and raised for view calls, which have no receipt).

class LedgerRevert(FedledgerError):
    """Base class for contract revert reasons."""


class NotAllowedOwner(LedgerRevert):
    """Caller is not on the whitelist (allowedOwner modifier)."""


class NotContractOwner(LedgerRevert):
    """Caller is not the contract owner (Ownable)."""


class NotOracle(LedgerRevert):
    """Caller is not the trusted oracle owner (onlyOracle modifier)."""


class OracleUnset(LedgerRevert):
    """Oracle round-trip requested before an oracle instance was linked."""
