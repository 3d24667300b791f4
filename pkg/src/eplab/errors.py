"""Exception hierarchy shared by all eplab modules."""


class EPLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(EPLabError):
    """Malformed or inconsistent scenario configuration."""


class DomainError(EPLabError):
    """Evaluation outside a profile's or function's valid domain."""


class PositivityError(EPLabError):
    """A quantity that must stay strictly positive is not."""


class SingularityError(EPLabError):
    """Trajectory reached the positivity floor.

    ``t_cross`` carries the estimated crossing time.
    """

    def __init__(self, message: str, t_cross: float | None = None):
        super().__init__(message)
        self.t_cross = t_cross


class StiffnessError(EPLabError):
    """Adaptive step size underflowed; integration cannot proceed."""


class InsufficientDataError(EPLabError):
    """Too few samples for the requested stencil or estimate."""


class DegenerateTrajectoryError(EPLabError):
    """Every sample was skipped; no residual can be formed."""


class ConstraintError(EPLabError):
    """Scenario parameters violate an algebraic compatibility constraint."""


class HermiticityError(EPLabError):
    """An operator or expectation value failed its Hermiticity witness."""


class InvalidStateError(EPLabError):
    """Wave state unsuitable for the requested measurement."""


class NumericsError(EPLabError):
    """A linear solve or other numerical kernel failed unexpectedly."""
