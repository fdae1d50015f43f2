"""Exception types that map onto the CLI exit-code contract."""


class DataError(Exception):
    """Malformed or inconsistent input data (exit code 2)."""


class NumericError(Exception):
    """A numeric routine failed to converge (exit code 3)."""
