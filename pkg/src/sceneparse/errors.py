class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class DegenerateRetrievalError(RuntimeError):
    """No training image received any matching vote."""


class NoNeighborsError(RuntimeError):
    """A super-pixel has no candidate neighbours to vote from."""


class UndefinedMetricError(ValueError):
    """A metric was requested over zero non-void pixels or items."""


class BundleError(RuntimeError):
    """A model bundle is missing, malformed or of another format version."""
