"""Exception types shared across the package."""


class BmkitError(Exception):
    """Base class for all package errors."""


class PreconditionError(BmkitError):
    """A mathematical precondition of an operation is violated.

    The CLI maps this to exit code 3.
    """


class InputFormatError(BmkitError):
    """Malformed serialized input (bad JSON structure, missing keys).

    The CLI maps this to exit code 2.
    """
