"""Exception hierarchy.

Every error raised by this package derives from ``EigenPrismError`` so that
callers (and the CLI) can map failures to a machine-readable category via the
class name.
"""


class EigenPrismError(ValueError):
    """Base class for all library errors."""

    @property
    def category(self) -> str:
        return type(self).__name__


class ConstantColumn(EigenPrismError):
    """A design column has zero empirical variance and cannot be standardized."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} has zero variance")


class NotPositiveDefinite(EigenPrismError):
    """An explicit covariance matrix is not symmetric positive definite."""


class DimensionError(EigenPrismError):
    """Input dimensions are outside the supported p >= n regime."""


class EmptySplit(EigenPrismError):
    """A sample split would leave one part with zero rows."""


class SingularSystem(EigenPrismError):
    """The constraint system is singular: eigenvalues effectively constant."""


class DegenerateDual(EigenPrismError):
    """No dual weight admits a solvable inner problem."""


class InvalidAlpha(EigenPrismError):
    """Significance level outside (0, 1)."""


class DegenerateBootstrap(EigenPrismError):
    """All bootstrap replicates produced an identical statistic."""


class ZeroResponse(EigenPrismError):
    """The response vector is identically zero."""


class DimensionMismatch(EigenPrismError):
    """Vector or matrix sizes do not agree."""


class InvalidGamma(EigenPrismError):
    """Aspect ratio outside the open interval (0, 1)."""


class NormalizationError(EigenPrismError):
    """Eigenvalues do not satisfy the required normalization."""


class InvalidCorrelation(EigenPrismError):
    """Correlation parameter produces a matrix outside the PSD cone."""
