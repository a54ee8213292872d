"""Exception hierarchy shared across the package."""


class LatstructError(Exception):
    """Base class for all package errors."""


class GraphError(LatstructError):
    """Malformed graph input: unknown node, bad query, cycle, ..."""


class DatasetError(LatstructError):
    """Problems loading or validating tabular data."""


class TestInputError(LatstructError):
    """A CI test was called with columns it cannot handle."""

    __test__ = False  # not a pytest class


class DegenerateDataError(TestInputError):
    """Singular correlation submatrix or otherwise untestable input."""


class BookkeepingError(LatstructError):
    """Internal learner invariant violated (signals a bug, not bad data)."""


class VerificationGuardError(LatstructError):
    """Preservation check requested on a graph too large to enumerate."""
