"""Exception types shared across the package."""


class MbangError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(MbangError):
    """A file or JSON document does not match its expected schema."""


class ValidationError(MbangError):
    """A structural precondition on inputs is violated."""


class NumericalError(MbangError):
    """A numerical operation cannot be carried out on the given data."""
