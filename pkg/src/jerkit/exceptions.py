"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
FitConvergenceError -> 4. Everything else is an unexpected failure.
"""


class JerkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(JerkitError):
    """Invalid or inconsistent configuration input."""


class BuildError(ConfigError):
    """A scenario could not be realized from its configuration."""


class DataError(JerkitError):
    """Measured or synthetic data violates a precondition."""


class CircuitError(JerkitError):
    """Non-physical or non-finite circuit parameters."""


class AmbiguousResonancesError(DataError):
    """Resonance search found a number of dips other than expected."""

    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = tuple(candidates)


class NoResonanceError(DataError):
    """A trace contains no usable resonance dip."""


class FitError(JerkitError):
    """A fit produced a rejected (non-physical) result."""


class FitConvergenceError(FitError):
    """Optimizer failed to converge within its iteration budget."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class ProfileError(JerkitError):
    """Requested mode profile is not at a circuit resonance."""
