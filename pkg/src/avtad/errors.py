"""Exception hierarchy shared across the package."""


class AvtadError(Exception):
    """Base class for all package-specific errors."""


class ContractError(AvtadError, ValueError):
    """A caller violated a documented precondition."""


class ShapeMismatchError(ContractError):
    """Operand shapes are incompatible for the requested operation."""


class ConfigurationError(AvtadError):
    """Invalid or inconsistent configuration. CLI exit code 2."""


class DataFormatError(AvtadError):
    """Malformed dataset or checkpoint document. CLI exit code 3."""


class NumericError(AvtadError):
    """Non-finite values encountered during optimization. CLI exit code 4."""
