"""Exception types. Each maps onto a command-line exit status."""


class GeoclustError(Exception):
    exit_code = 2


class ValidationError(GeoclustError, ValueError):
    """Malformed input: bad shapes, bounds, schema or configuration."""

    exit_code = 2


class DegenerateDataError(GeoclustError, ValueError):
    """Well-formed input on which the computation is undefined."""

    exit_code = 3
