"""Confidence intervals for signal magnitude, noise level, and SNR when p > n.

The central object is a weighted sum of squared rotated responses whose
weights are chosen by convex optimization to be conditionally unbiased for the
quantity of interest while minimizing a computable variance bound.  See the
README for the CLI and the Monte-Carlo harness.
"""

from .core_model import (
    CovarianceSpec,
    Dataset,
    DesignSpectrum,
    spectral_decompose,
    split_sample,
    standardize_columns,
    whiten,
)
from .errors import (
    ConstantColumn,
    DegenerateBootstrap,
    DegenerateDual,
    DimensionError,
    DimensionMismatch,
    EigenPrismError,
    EmptySplit,
    InvalidAlpha,
    InvalidCorrelation,
    InvalidGamma,
    NormalizationError,
    NotPositiveDefinite,
    SingularSystem,
    ZeroResponse,
)
from .estimators import (
    REGRESSION_ERROR,
    SIGMA_SQUARED,
    SNR,
    THETA_SQUARED,
    EigenPrismOptions,
    IntervalEstimate,
    bootstrap_t1_interval,
    eigenprism_estimate,
    exact_conditional_variance,
    regression_error_interval,
    snr_interval,
    t1_interval,
    two_step_interval,
)
from .mp_tools import (
    MPModel,
    are_upper_bound,
    indistinguishability_bound,
    mp_cdf,
    mp_model,
    mp_pdf,
)
from .sim_harness import (
    CoverageReport,
    SimulationScenario,
    chi2_width_adjustment_coverage,
    gen_beta,
    gen_design,
    run_scenario,
    sparse_correlation_matrix,
)
from .weight_solver import (
    ConstraintSet,
    WeightSolution,
    kkt_residual,
    solve_minmax,
    solve_weighted_quadratic,
)

__version__ = "0.1.0"
