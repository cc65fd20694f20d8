"""Exception types shared across the package."""


class NumericsError(RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""


class ContinuationUnreliableError(NumericsError):
    """Analytic continuation left the region where the algorithm is trusted."""


class RefinementError(NumericsError):
    """Iterative root refinement diverged or stalled."""


class BoundaryError(NumericsError):
    """A search-region boundary passes too close to a zero."""


class IncompleteSearchError(NumericsError):
    """Zero counting and zero refinement disagree for a search region."""


class PoleSignal(RuntimeError):
    """An S-matrix evaluation landed on (or numerically at) a pole."""


class ConfigError(ValueError):
    """A run configuration is malformed or references missing artifacts."""
