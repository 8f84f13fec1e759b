"""Exception hierarchy shared by every module."""


class IglsError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(IglsError, ValueError):
    """An input object violates one of its invariants."""


class NumericalError(IglsError, ArithmeticError):
    """A numerical stage failed (breakdown, singularity, degeneracy)."""


class LevinsonBreakdown(NumericalError):
    """The Levinson recursion produced a non-positive prediction variance."""

    def __init__(self, stage: int, variance: float):
        self.stage = stage
        self.variance = variance
        super().__init__(
            f"Levinson breakdown at stage {stage}: prediction variance {variance:.3e} "
            "is not positive (autocovariance is indefinite or numerically singular)"
        )


class SingularMatrixError(NumericalError):
    """A normal-equation or bread matrix is numerically singular."""


class DegenerateResidualsError(NumericalError):
    """OLS residuals are numerically zero, so no error model is identifiable."""


class NonStationaryError(NumericalError):
    """A fitted or supplied autoregression has a root on or inside the unit circle."""


class ReplicateError(NumericalError):
    """A Monte Carlo replicate failed; carries what is needed to reproduce it."""

    def __init__(self, replicate: int, seed: int, cause: Exception):
        self.replicate = replicate
        self.seed = seed
        self.cause = cause
        super().__init__(f"replicate {replicate} (seed {seed}) failed: {cause}")
