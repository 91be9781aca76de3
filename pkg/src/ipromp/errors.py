"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError/DomainError -> 3, NumericalError -> 4. Each class also carries a
short stable ``code`` string printed in CLI error lines so callers can tell
apart failure kinds that share an exit code.
"""


class IPrompError(Exception):
    """Base class for all errors raised by this package."""

    code = "E_ERROR"


class ConfigError(IPrompError):
    """Invalid configuration: bad option values, too few demonstrations,
    empty task libraries, unsupported sweep settings."""

    code = "E_CONFIG"


class DataError(IPrompError):
    """Invalid data content: NaN contamination, inconsistent shapes,
    mismatched report pairings."""

    code = "E_DATA"


class SchemaError(DataError):
    """File or structure does not match the expected schema/version."""

    code = "E_SCHEMA"


class SchemaVersionError(SchemaError):
    """File declares a schema version this build does not support."""

    code = "E_VERSION"


class DimensionError(SchemaError):
    """Declared dimensions disagree with the stored arrays."""

    code = "E_DIMENSION"


class DataContaminationError(DataError):
    """Non-finite values where finite numbers are required."""

    code = "E_NAN"


class DomainError(IPrompError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    code = "E_DOMAIN"


class NumericalError(IPrompError):
    """A numerical operation failed: singular system, likelihood underflow,
    degenerate blend."""

    code = "E_NUMERIC"
