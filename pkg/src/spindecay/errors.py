"""Exception types shared across modules."""

from __future__ import annotations


class HilbertDimensionError(ValueError):
    """Requested spin system exceeds the configured Hilbert-space cap."""


class ResonanceNotFoundError(LookupError):
    """No field in the search bracket brings the transition to resonance."""


class ConvergenceError(RuntimeError):
    """A fit failed to converge or found no usable signal.

    Carries the best result reached so far in ``best`` (may be None when the
    failure happened before any iterate existed).
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
