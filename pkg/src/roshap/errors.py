"""Exception taxonomy shared across the package.

The three concrete classes map onto the CLI exit-code contract:
ConfigError -> 2, DataError -> 3, NumericError -> 4.
"""


class RoshapError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RoshapError, ValueError):
    """Invalid parameter or option value (a usage problem, not a data problem)."""


class DataError(RoshapError, ValueError):
    """Malformed or inadmissible input data."""


class NumericError(RoshapError, ArithmeticError):
    """Numeric degeneracy: empty out-of-bag set after retries, zero cover, degenerate KDE."""
