"""Error types shared across the package.

Invalid arguments raise plain ValueError; the two classes below mark
failures that callers may want to tell apart from bad input.
"""


class NumericFailure(RuntimeError):
    """Raised when a computation produces non-finite values.

    Carries optional salvage state so callers can persist the last
    usable artifact (e.g. the weights before a diverging update).
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class ConsistencyError(RuntimeError):
    """Raised when an internal invariant is violated (a bug, not bad input)."""
