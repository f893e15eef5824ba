"""Interval estimators for signal magnitude, noise level, SNR, and fit error.

All confidence intervals here share one template: an unbiased statistic built
from the squared rotated response, a variance upper bound that depends on the
data only through ||y||^2 / n, and Gaussian-approximation endpoints clipped
into the estimand's admissible range.  The known-noise chi-square interval and
its BCa bootstrap generalization are included both as practical tools and as
calibration baselines for the Monte-Carlo harness.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .core_model import CovarianceSpec, Dataset, _decompose, whiten
from .errors import (
    DegenerateBootstrap,
    DimensionMismatch,
    InvalidAlpha,
    ZeroResponse,
)
from .weight_solver import (
    ConstraintSet,
    WeightSolution,
    solve_minmax,
    solve_weighted_quadratic,
)

THETA_SQUARED = "theta2"
SIGMA_SQUARED = "sigma2"
SNR = "snr"
REGRESSION_ERROR = "error_l2"

_TARGETS = {THETA_SQUARED, SIGMA_SQUARED}


@dataclass(frozen=True)
class IntervalEstimate:
    """Point estimate with two-sided confidence bounds.

    ``point``, ``lower`` and ``upper`` are clipped into the estimand's
    admissible range ([0, inf) everywhere, additionally <= 1 for SNR); the
    clip flags record whether clipping actually moved an endpoint.
    ``sd_bound`` is the standard-deviation upper bound the Gaussian endpoints
    were built from (for the bootstrap interval, the bootstrap SD).
    """

    estimand: str
    point: float
    lower: float
    upper: float
    alpha: float
    sd_bound: float
    clipped_lower: bool = False
    clipped_upper: bool = False

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class EigenPrismOptions:
    """Tuning knobs shared by the spectral estimators.

    ``zero_first`` pins the leading weights to zero (guards against
    non-generic top eigenvectors, e.g. population structure);
    ``zero_last_if_null`` pins weights on zero eigenvalues (rank deficiency
    from centering); ``two_step`` re-optimizes the weights around a first-pass
    estimate of the signal fraction.
    """

    zero_first: int = 0
    zero_last_if_null: bool = True
    alpha: float = 0.05
    two_step: bool = False


def _check_alpha(alpha: float) -> float:
    if not 0.0 < float(alpha) < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def _clipped_interval(estimand, point_raw, lower_raw, upper_raw, alpha, sd_bound, cap):
    point = min(max(point_raw, 0.0), cap)
    lower = min(max(lower_raw, 0.0), cap)
    upper = min(max(upper_raw, 0.0), cap)
    return IntervalEstimate(
        estimand=estimand,
        point=float(point),
        lower=float(lower),
        upper=float(upper),
        alpha=alpha,
        sd_bound=float(sd_bound),
        clipped_lower=bool(lower != lower_raw),
        clipped_upper=bool(upper != upper_raw),
    )


def _gaussian_interval(estimand, statistic, sd_bound, alpha, cap=np.inf):
    z = norm.ppf(1.0 - alpha / 2.0)
    return _clipped_interval(
        estimand,
        statistic,
        statistic - z * sd_bound,
        statistic + z * sd_bound,
        alpha,
        sd_bound,
        cap,
    )


def t1_interval(y: np.ndarray, sigma2: float, alpha: float = 0.05) -> IntervalEstimate:
    """Exact chi-square interval for the signal magnitude with known noise.

    Under the Gaussian model ||y||^2 / (theta^2 + sigma^2) is chi-square with
    n degrees of freedom, so [||y||^2 / Q_{1-a/2} - sigma^2,
    ||y||^2 / Q_{a/2} - sigma^2] has exact 1 - alpha coverage before the
    clip at zero.
    """
    alpha = _check_alpha(alpha)
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 1:
        raise DimensionMismatch("y must be non-empty")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be non-negative, got {sigma2}")
    n = y.size
    ss = float(y @ y)
    point_raw = ss / n - sigma2
    lower_raw = ss / chi2.ppf(1.0 - alpha / 2.0, n) - sigma2
    upper_raw = ss / chi2.ppf(alpha / 2.0, n) - sigma2
    sd_plugin = np.sqrt(2.0 / n) * ss / n
    return _clipped_interval(
        THETA_SQUARED, point_raw, lower_raw, upper_raw, alpha, sd_plugin, np.inf
    )


def bootstrap_t1_interval(
    y: np.ndarray,
    sigma2: float,
    alpha: float = 0.05,
    B: int = 10_000,
    seed=0,
) -> IntervalEstimate:
    """BCa bootstrap interval for the signal magnitude with known noise.

    Resamples the entries of y with replacement, recomputes
    mean(y^2) - sigma2 on each replicate, and applies bias correction (from
    the bootstrap CDF at the observed statistic) and acceleration (from the
    jackknife skewness).  Raises ``DegenerateBootstrap`` when every replicate
    yields the same value.
    """
    alpha = _check_alpha(alpha)
    if B < 1000:
        raise ValueError(f"B must be at least 1000, got {B}")
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    y_sq = y * y
    observed = float(y_sq.mean()) - sigma2

    rng = np.random.default_rng(seed)
    stats = np.empty(B)
    chunk = max(1, (1 << 23) // max(n, 1))
    for start in range(0, B, chunk):
        m = min(chunk, B - start)
        idx = rng.integers(0, n, size=(m, n))
        stats[start : start + m] = y_sq[idx].mean(axis=1) - sigma2
    if np.ptp(stats) == 0.0:
        raise DegenerateBootstrap("all bootstrap statistics identical")

    # bias correction; proportion clipped away from {0, 1} to keep z0 finite
    prop = float(np.clip((stats < observed).mean(), 1.0 / B, 1.0 - 1.0 / B))
    z0 = norm.ppf(prop)
    # acceleration from the jackknife (leave-one-out means in closed form)
    jack = (y_sq.sum() - y_sq) / (n - 1) - sigma2
    dev = jack.mean() - jack
    denom = float((dev**2).sum()) ** 1.5
    accel = float((dev**3).sum()) / (6.0 * denom) if denom > 0 else 0.0

    z_lo = norm.ppf(alpha / 2.0)
    z_hi = norm.ppf(1.0 - alpha / 2.0)
    a1 = norm.cdf(z0 + (z0 + z_lo) / (1.0 - accel * (z0 + z_lo)))
    a2 = norm.cdf(z0 + (z0 + z_hi) / (1.0 - accel * (z0 + z_hi)))
    lower_raw, upper_raw = np.quantile(stats, [a1, a2])
    return _clipped_interval(
        THETA_SQUARED,
        observed,
        float(lower_raw),
        float(upper_raw),
        alpha,
        float(stats.std()),
        np.inf,
    )


def _constraints_for(spec, target: str, opts: EigenPrismOptions) -> ConstraintSet:
    if target not in _TARGETS:
        raise ValueError(f"target must be one of {sorted(_TARGETS)}, got {target!r}")
    if opts.zero_first < 0 or opts.zero_first + 2 > spec.n:
        raise ValueError(
            f"zero_first={opts.zero_first} leaves fewer than 2 free weights (n={spec.n})"
        )
    forced = set(range(opts.zero_first))
    # zero eigenvalues in the n <= p regime are rank-deficiency artifacts and
    # get pinned; with fewer columns than rows (subset error intervals) they
    # are structural noise contrasts and must stay free
    if opts.zero_last_if_null and spec.n <= spec.p:
        forced.update(np.flatnonzero(spec.lam == 0.0).tolist())
    if target == THETA_SQUARED:
        return ConstraintSet.for_theta2(forced)
    return ConstraintSet.for_sigma2(forced)


def _spectral_statistic(spec, sol: WeightSolution) -> float:
    return float(sol.w @ (spec.z**2))


def eigenprism_with_solution(
    spec, target: str, opts: EigenPrismOptions | None = None
) -> tuple[IntervalEstimate, WeightSolution]:
    """Min-max weighted interval plus the underlying weight solution."""
    opts = opts or EigenPrismOptions()
    alpha = _check_alpha(opts.alpha)
    constraints = _constraints_for(spec, target, opts)
    sol = solve_minmax(spec.lam, constraints)
    statistic = _spectral_statistic(spec, sol)
    scale = spec.y_sq_norm / spec.n
    sd_bound = np.sqrt(2.0 * sol.objective) * scale
    return _gaussian_interval(target, statistic, sd_bound, alpha), sol


def eigenprism_estimate(
    spec, target: str, opts: EigenPrismOptions | None = None
) -> IntervalEstimate:
    """Confidence interval for theta^2 or sigma^2 from a design spectrum.

    Solves the min-max weight program with the unbiasedness constraints for
    the requested target, forms the statistic sum w_i z_i^2, and pairs it with
    the variance bound sqrt(2 val) * ||y||^2 / n.  Endpoints come from the
    unclipped statistic; the reported point and endpoints are clipped at zero.
    """
    return eigenprism_with_solution(spec, target, opts)[0]


def snr_interval(spec, opts: EigenPrismOptions | None = None) -> IntervalEstimate:
    """Interval for the signal fraction theta^2 / (theta^2 + sigma^2).

    Divides the theta^2 statistic and endpoints by ||y||^2 / n and clamps
    everything into [0, 1].  Raises ``ZeroResponse`` for an identically zero
    response.
    """
    opts = opts or EigenPrismOptions()
    if spec.y_sq_norm == 0.0:
        raise ZeroResponse("||y||^2 = 0: signal fraction undefined")
    if opts.two_step:
        base = two_step_interval(spec, THETA_SQUARED, opts)
    else:
        base = eigenprism_estimate(spec, THETA_SQUARED, opts)
    scale = spec.y_sq_norm / spec.n
    return _clipped_interval(
        SNR,
        base.point / scale,
        base.lower / scale,
        base.upper / scale,
        base.alpha,
        base.sd_bound / scale,
        cap=1.0,
    )


def two_step_interval(
    spec, target: str, opts: EigenPrismOptions | None = None
) -> IntervalEstimate:
    """Refined interval that re-optimizes weights around an estimated rho.

    Step 1 runs the standard theta^2 procedure and converts it to
    rho_hat = clamp(T / (||y||^2 / n), 0, 1).  Step 2 re-solves the weights by
    minimizing sum w_i^2 (lam_i rho_hat + 1 - rho_hat)^2 under the same
    constraints, which is the exact variance-bound shape once rho is treated
    as known.  Falls back to the plain interval (with a warning) if step 1
    degenerates to zero width.
    """
    opts = opts or EigenPrismOptions()
    alpha = _check_alpha(opts.alpha)
    step1 = eigenprism_estimate(spec, THETA_SQUARED, opts)
    if step1.width == 0.0:
        warnings.warn(
            "two-step refinement skipped: first-pass interval has zero width",
            RuntimeWarning,
            stacklevel=2,
        )
        if target == THETA_SQUARED:
            return step1
        return eigenprism_estimate(spec, target, opts)
    scale = spec.y_sq_norm / spec.n
    rho = min(step1.point / scale, 1.0)
    cvec = (spec.lam * rho + 1.0 - rho) ** 2
    cvec = np.maximum(cvec, 1e-12)  # c can vanish only when rho=1 and lam=0
    constraints = _constraints_for(spec, target, opts)
    sol = solve_weighted_quadratic(spec.lam, cvec, constraints)
    statistic = _spectral_statistic(spec, sol)
    sd_bound = np.sqrt(2.0) * scale * np.sqrt(sol.objective)
    return _gaussian_interval(target, statistic, sd_bound, alpha)


def regression_error_interval(
    holdout: Dataset,
    beta_hat: np.ndarray,
    subset: np.ndarray | None = None,
    cov: CovarianceSpec | None = None,
    opts: EigenPrismOptions | None = None,
) -> IntervalEstimate:
    """Interval for the l2 error of a coefficient estimate on held-out data.

    Forms the residual response y - X beta_hat, which follows a linear model
    with coefficient beta - beta_hat, and runs the theta^2 machinery on it;
    the returned interval is on the square-root scale.  ``holdout`` must be
    independent of how ``beta_hat`` was produced (caller's responsibility).
    With ``subset`` only those coefficient indices enter the estimand; with an
    explicit covariance the design is whitened first and the estimand is the
    covariance-weighted error norm.  ``sd_bound`` stays on the squared scale.
    """
    opts = opts or EigenPrismOptions()
    cov = cov or CovarianceSpec.identity()
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    if beta_hat.size != holdout.p:
        raise DimensionMismatch(
            f"beta_hat has length {beta_hat.size} but X has p={holdout.p}"
        )
    residual = holdout.y - holdout.X @ beta_hat
    data = whiten(Dataset(holdout.X, residual), cov)
    if subset is not None:
        subset = np.asarray(subset, dtype=int).ravel()
        if subset.size == 0:
            raise DimensionMismatch("subset must be non-empty")
        if subset.min() < 0 or subset.max() >= holdout.p:
            raise DimensionMismatch("subset indices out of range")
        data = Dataset(data.X[:, subset], data.y)
    # a small subset can leave fewer columns than rows; the regime-free
    # decomposition keeps the structural zero eigenvalues as noise contrasts
    spec = _decompose(data)
    if opts.two_step:
        base = two_step_interval(spec, THETA_SQUARED, opts)
    else:
        base = eigenprism_estimate(spec, THETA_SQUARED, opts)
    return IntervalEstimate(
        estimand=REGRESSION_ERROR,
        point=float(np.sqrt(base.point)),
        lower=float(np.sqrt(base.lower)),
        upper=float(np.sqrt(base.upper)),
        alpha=base.alpha,
        sd_bound=base.sd_bound,
        clipped_lower=base.clipped_lower,
        clipped_upper=base.clipped_upper,
    )


def exact_conditional_variance(
    w: np.ndarray, lam: np.ndarray, theta2: float, sigma2: float, p: int
) -> float:
    """Exact conditional variance of sum w_i z_i^2 given the spectrum.

    Evaluates
    2 sigma^4 sum w^2 + 4 sigma^2 theta^2 sum w^2 lam
    + 2 theta^4 [ p/(p+2) sum w^2 lam^2 - (sum w lam)^2 / (p+2) ],
    which is exact under the Gaussian design (used as a testing oracle for the
    variance upper bounds).
    """
    w = np.asarray(w, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if w.shape != lam.shape:
        raise DimensionMismatch("w and lam must have the same length")
    if p < w.size:
        raise DimensionMismatch(f"p={p} smaller than the spectrum length {w.size}")
    sw2 = float(w @ w)
    sw2l = float(w**2 @ lam)
    sw2l2 = float(w**2 @ lam**2)
    swl = float(w @ lam)
    return (
        2.0 * sigma2**2 * sw2
        + 4.0 * sigma2 * theta2 * sw2l
        + 2.0 * theta2**2 * (p / (p + 2.0) * sw2l2 - swl**2 / (p + 2.0))
    )
