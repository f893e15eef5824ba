"""Monte-Carlo coverage experiments at desk scale.

A scenario bundles the design family, coefficient family, dimensions, signal
and noise levels, and trial count.  Trials are deterministic given the master
seed: every trial derives its own RNG streams from (seed, trial, purpose), so
serial and parallel runs produce identical trial outcomes.

Design families follow the robustness study conventions: Bernoulli and
Student-t entries are standardized to mean 0 and variance 1 in distribution;
the dense correlation family uses an equicorrelation matrix; the sparse
family assigns +/-strength to same-parity index pairs, projects onto the PSD
cone, and resets the diagonal to 1 (iterated until the matrix is numerically
PSD with exact unit diagonal).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.stats import chi2, norm

from .core_model import Dataset, spectral_decompose
from .errors import EigenPrismError, InvalidAlpha, InvalidCorrelation
from .estimators import (
    SIGMA_SQUARED,
    SNR,
    THETA_SQUARED,
    EigenPrismOptions,
    bootstrap_t1_interval,
    eigenprism_estimate,
    snr_interval,
    t1_interval,
    two_step_interval,
)

DESIGN_FAMILIES = ("gaussian", "bernoulli", "student-t", "corr-dense", "corr-sparse")
BETA_FAMILIES = ("dense", "sparse")
METHODS = ("eigenprism", "t1", "t1-bootstrap")

_DEFAULT_DESIGN_PARAM = {"bernoulli": 0.5, "student-t": 5.0, "corr-dense": 0.1,
                         "corr-sparse": 0.1}


@dataclass(frozen=True)
class SimulationScenario:
    """Complete description of one coverage experiment."""

    n: int
    p: int
    theta2: float
    sigma2: float
    trials: int
    seed: int
    design: str = "gaussian"
    design_param: float | None = None
    beta_family: str = "dense"
    beta_param: float | None = None
    alpha: float = 0.05
    target: str = THETA_SQUARED
    method: str = "eigenprism"
    bootstrap_b: int = 10_000
    options: EigenPrismOptions = field(default_factory=EigenPrismOptions)

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if self.theta2 < 0 or self.sigma2 < 0 or self.theta2 + self.sigma2 <= 0:
            raise ValueError("theta2 and sigma2 must be non-negative with a positive sum")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.design not in DESIGN_FAMILIES:
            raise ValueError(f"unknown design family {self.design!r}")
        if self.beta_family not in BETA_FAMILIES:
            raise ValueError(f"unknown beta family {self.beta_family!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method != "eigenprism" and self.target != THETA_SQUARED:
            raise ValueError("t1 methods only estimate theta2")
        if self.beta_family == "sparse":
            f = self.beta_param
            if f is None or not 0.0 < f <= 1.0:
                raise ValueError("sparse beta requires beta_param in (0, 1]")
        if self.design == "bernoulli":
            q = self.design_param_value
            if not 0.0 < q < 1.0:
                raise ValueError("bernoulli design requires a rate in (0, 1)")
        if self.design == "student-t" and self.design_param_value <= 2.0:
            raise ValueError("student-t design requires df > 2 for a finite variance")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidAlpha(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def design_param_value(self) -> float:
        if self.design_param is not None:
            return float(self.design_param)
        return _DEFAULT_DESIGN_PARAM.get(self.design, 0.0)

    @property
    def rho(self) -> float:
        return self.theta2 / (self.theta2 + self.sigma2)

    @property
    def true_value(self) -> float:
        if self.target == THETA_SQUARED:
            return self.theta2
        if self.target == SIGMA_SQUARED:
            return self.sigma2
        if self.target == SNR:
            return self.rho
        raise ValueError(f"unsupported scenario target {self.target!r}")


@dataclass(frozen=True)
class CoverageReport:
    """Aggregated outcome of a scenario run."""

    scenario: SimulationScenario
    empirical_coverage: float
    mean_width: float
    mean_point: float
    se_coverage: float
    failure_count: int = 0


def _trial_rng(scenario: SimulationScenario, trial: int, purpose: int):
    return np.random.default_rng((scenario.seed, trial, purpose))


@lru_cache(maxsize=8)
def _sparse_corr_factor(p: int, strength: float):
    matrix = sparse_correlation_matrix(p, strength)
    vals, vecs = np.linalg.eigh(matrix)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sparse_correlation_matrix(
    p: int, strength: float, tol: float = 1e-10, max_iter: int = 100
) -> np.ndarray:
    """Alternating +/-strength correlation pattern projected into the PSD cone.

    Entries are +strength on even-even index pairs, -strength on odd-odd
    pairs, zero on mixed pairs.  Projection (eigenvalue clipping) and diagonal
    reset are alternated until the smallest eigenvalue exceeds -tol, leaving
    roughly a quarter of the entries at +strength, half at zero, and a quarter
    slightly negative.
    """
    if not 0.0 <= strength < 1.0:
        raise InvalidCorrelation(f"strength must lie in [0, 1), got {strength}")
    signs = np.where(np.arange(p) % 2 == 0, 1.0, -1.0)
    corr = strength * (signs[:, None] + signs[None, :]) / 2.0
    np.fill_diagonal(corr, 1.0)
    for _ in range(max_iter):
        vals, vecs = np.linalg.eigh(corr)
        if vals[0] >= -tol:
            return corr
        corr = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        np.fill_diagonal(corr, 1.0)
    raise InvalidCorrelation("PSD projection did not converge")


def gen_design(scenario: SimulationScenario, trial: int) -> np.ndarray:
    """Draw the trial's design matrix, deterministic given (seed, trial)."""
    rng = _trial_rng(scenario, trial, 0)
    n, p = scenario.n, scenario.p
    kind = scenario.design
    if kind == "gaussian":
        return rng.standard_normal((n, p))
    if kind == "bernoulli":
        q = scenario.design_param_value
        raw = (rng.random((n, p)) < q).astype(float)
        return (raw - q) / np.sqrt(q * (1.0 - q))
    if kind == "student-t":
        df = scenario.design_param_value
        return rng.standard_t(df, size=(n, p)) / np.sqrt(df / (df - 2.0))
    if kind == "corr-dense":
        c = scenario.design_param_value
        smallest = -1.0 / (p - 1) if p > 1 else 0.0
        if c < smallest or c > 1.0:
            raise InvalidCorrelation(f"equicorrelation {c} is not PSD for p={p}")
        z = rng.standard_normal((n, p))
        # closed-form square root of (1-c) I + c J
        base = np.sqrt(1.0 - c)
        spike = np.sqrt(1.0 - c + p * c)
        return base * z + (spike - base) * z.mean(axis=1, keepdims=True)
    factor = _sparse_corr_factor(p, scenario.design_param_value)
    return rng.standard_normal((n, p)) @ factor.T


def gen_beta(scenario: SimulationScenario, trial: int) -> np.ndarray:
    """Draw the trial's coefficient vector with ||beta||^2 = theta2 exactly."""
    rng = _trial_rng(scenario, trial, 1)
    p = scenario.p
    raw = rng.standard_normal(p)
    if scenario.beta_family == "sparse":
        k = int(np.ceil(scenario.beta_param * p))
        support = rng.choice(p, size=k, replace=False)
        beta = np.zeros(p)
        beta[support] = raw[support]
    else:
        beta = raw
    if scenario.theta2 == 0.0:
        return np.zeros(p)
    return beta * np.sqrt(scenario.theta2) / np.linalg.norm(beta)


def _run_trial(scenario: SimulationScenario, trial: int):
    x = gen_design(scenario, trial)
    beta = gen_beta(scenario, trial)
    noise_rng = _trial_rng(scenario, trial, 2)
    eps = noise_rng.normal(0.0, np.sqrt(scenario.sigma2), scenario.n)
    y = x @ beta + eps
    opts = EigenPrismOptions(
        zero_first=scenario.options.zero_first,
        zero_last_if_null=scenario.options.zero_last_if_null,
        alpha=scenario.alpha,
        two_step=scenario.options.two_step,
    )
    if scenario.method == "t1":
        est = t1_interval(y, scenario.sigma2, scenario.alpha)
    elif scenario.method == "t1-bootstrap":
        est = bootstrap_t1_interval(
            y,
            scenario.sigma2,
            scenario.alpha,
            B=scenario.bootstrap_b,
            seed=(scenario.seed, trial, 3),
        )
    else:
        spec = spectral_decompose(Dataset(x, y))
        if scenario.target == SNR:
            est = snr_interval(spec, opts)
        elif opts.two_step:
            est = two_step_interval(spec, scenario.target, opts)
        else:
            est = eigenprism_estimate(spec, scenario.target, opts)
    true = scenario.true_value
    return est.contains(true), est.width, est.point


def run_scenario(
    scenario: SimulationScenario,
    *,
    threads: int = 1,
    allow_failures: bool = False,
) -> CoverageReport:
    """Run every trial, record containment and width, aggregate.

    Trials execute independently (optionally across a thread pool) and are
    reproducible trial-for-trial regardless of scheduling.  Estimator errors
    abort only their own trial; any failure aborts the run unless
    ``allow_failures`` is set, in which case it is counted in the report.
    """
    results: list[tuple[bool, float, float] | None] = [None] * scenario.trials
    errors: list[Exception] = []

    def run_one(t: int):
        try:
            results[t] = _run_trial(scenario, t)
        except EigenPrismError as exc:
            errors.append(exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_one, range(scenario.trials)))
    else:
        for t in range(scenario.trials):
            run_one(t)

    if errors and not allow_failures:
        raise errors[0]
    done = [r for r in results if r is not None]
    if not done:
        raise EigenPrismError("every trial failed")
    covered = np.array([r[0] for r in done], dtype=float)
    widths = np.array([r[1] for r in done])
    points = np.array([r[2] for r in done])
    coverage = float(covered.mean())
    return CoverageReport(
        scenario=scenario,
        empirical_coverage=coverage,
        mean_width=float(widths.mean()),
        mean_point=float(points.mean()),
        se_coverage=float(np.sqrt(coverage * (1.0 - coverage) / len(done))),
        failure_count=len(errors),
    )


def chi2_width_adjustment_coverage(n: int, alpha: float = 0.05) -> float:
    """Achieved coverage P(|N(0,1)| <= z_{1-a/2} * W / n) with W ~ chi2_n.

    Quantifies the coverage loss from replacing the variance scale by its
    ||y||^2 / n estimate: the nominal 1 - alpha is met only as n grows.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1:
        raise ValueError("n must be positive")
    z = norm.ppf(1.0 - alpha / 2.0)

    def integrand(w):
        return (2.0 * norm.cdf(z * w / n) - 1.0) * chi2.pdf(w, n)

    lo = max(0.0, n - 40.0 * np.sqrt(2.0 * n))
    hi = n + 40.0 * np.sqrt(2.0 * n)
    value, _ = integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-12)
    return float(value)
