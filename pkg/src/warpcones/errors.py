"""Shared exception types."""


class InputError(ValueError):
    """Arguments violate an operation's contract."""


class ConfigError(ValueError):
    """An experiment config failed validation."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


class BallSizeExceeded(RuntimeError):
    """Word-ball enumeration hit the configured element cap.

    Carries the number of elements found so far and, when raised from the
    warped-distance oracle, the best upper bound established before the cap.
    """

    def __init__(self, message, partial_count, radius, upper_bound=None):
        super().__init__(message)
        self.partial_count = partial_count
        self.radius = radius
        self.upper_bound = upper_bound


class RegionEmptyError(RuntimeError):
    """A Voronoi region received no samples, invalidating measure ratios."""

    def __init__(self, region_index, message=None):
        super().__init__(message or f"region {region_index} received zero samples")
        self.region_index = region_index


class SpectralError(RuntimeError):
    """Eigensolver did not converge; carries residual norms when available."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class PreconditionError(InputError):
    """A geometric precondition failed (e.g. base point inside the singular set)."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
