"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should
raise ``DataError`` for problems with user-supplied inputs and
``NumericalError`` when a computation cannot be completed reliably.
"""


class MaxsrError(Exception):
    """Base class for all package errors."""


class DataError(MaxsrError):
    """Invalid or degenerate input data (bad panel, tied selection, ...)."""


class NumericalError(MaxsrError):
    """A numerical routine failed (non-convergence, inconsistent bounds, ...)."""
