"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A precondition or configuration contract was violated.

    The message always states the violated condition so that callers
    (and the command line front end) can surface it verbatim.
    """


class NumericalAbort(RuntimeError):
    """A computation produced NaN/Inf and was stopped."""
