"""Exception types shared across the package."""


class CycleError(ValueError):
    """A graph that must be acyclic contains a directed cycle."""


class GraphFormatError(ValueError):
    """Malformed serialized graph text."""


class SingularityError(ValueError):
    """A matrix that must be invertible is singular or numerically so."""


class DegreesOfFreedomError(ValueError):
    """Too few samples for the requested conditional test."""


class EnumerationOverflowError(RuntimeError):
    """DAG enumeration exceeded its cap.

    Carries the partial list of DAGs found so far in ``partial`` and the
    cap that was hit in ``cap``, so callers can decide whether partial
    results are acceptable.
    """

    def __init__(self, partial, cap):
        super().__init__(f"equivalence class larger than cap={cap}")
        self.partial = partial
        self.cap = cap


class NoValidGraphsError(RuntimeError):
    """Every resampled graph failed validity screening.

    Carries ``kept_table``, a tuple of (c_star, kept_count) pairs when a
    grid sweep was involved, or None for a single-configuration run.
    """

    def __init__(self, message="no valid graphs", kept_table=None):
        super().__init__(message)
        self.kept_table = kept_table


class ConfigError(ValueError):
    """Invalid command-line or config-file settings."""


class DataError(ValueError):
    """Unreadable or malformed input data."""
