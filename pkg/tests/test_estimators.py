import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import gammainc
from scipy.stats import norm

from eigenprism import (
    ConstraintSet,
    Dataset,
    DegenerateBootstrap,
    DimensionMismatch,
    EigenPrismOptions,
    InvalidAlpha,
    SIGMA_SQUARED,
    THETA_SQUARED,
    ZeroResponse,
    bootstrap_t1_interval,
    eigenprism_estimate,
    exact_conditional_variance,
    regression_error_interval,
    snr_interval,
    solve_minmax,
    solve_weighted_quadratic,
    spectral_decompose,
    t1_interval,
    two_step_interval,
)
from eigenprism.core_model import DesignSpectrum
from eigenprism.estimators import eigenprism_with_solution


def chi2_quantile_oracle(tau, n):
    """Quantile via direct numerical inversion of the regularized incomplete gamma."""
    return 2.0 * brentq(
        lambda q: gammainc(n / 2.0, q) - tau, 1e-12, 10.0 * n + 200.0, xtol=1e-12
    )


def noise_spectrum(rng, n, p, sigma2, theta2=0.0):
    x = rng.standard_normal((n, p))
    if theta2 > 0.0:
        beta = rng.standard_normal(p)
        beta *= np.sqrt(theta2) / np.linalg.norm(beta)
        y = x @ beta + rng.normal(0.0, np.sqrt(sigma2), n)
    else:
        y = rng.normal(0.0, np.sqrt(sigma2), n)
    return spectral_decompose(Dataset(x, y))


class TestT1:
    def test_zero_noise_interval_positive(self):
        y = np.array([1.0, -2.0, 0.5, 3.0])
        est = t1_interval(y, sigma2=0.0, alpha=0.05)
        assert 0.0 < est.lower < est.point < est.upper

    def test_endpoints_match_quantile_oracle(self):
        n, sigma2, alpha = 100, 5.0, 0.05
        y = np.full(n, np.sqrt(10.0))  # ||y||^2 = 1000 exactly
        est = t1_interval(y, sigma2, alpha)
        q_hi = chi2_quantile_oracle(1.0 - alpha / 2.0, n)
        q_lo = chi2_quantile_oracle(alpha / 2.0, n)
        assert est.lower == pytest.approx(max(1000.0 / q_hi - 5.0, 0.0), rel=1e-9)
        assert est.upper == pytest.approx(1000.0 / q_lo - 5.0, rel=1e-9)
        assert est.point == pytest.approx(5.0, rel=1e-12)

    def test_monte_carlo_coverage_is_exact(self):
        # ||y||^2 ~ (theta2+sigma2) chi2_n; coverage of the exact interval
        n, theta2, sigma2 = 100, 5.0, 5.0
        trials = 100_000
        rng = np.random.default_rng(12)
        ss = (theta2 + sigma2) * rng.chisquare(n, size=trials)
        from scipy.stats import chi2 as chi2_dist

        lower = ss / chi2_dist.ppf(0.975, n) - sigma2
        upper = ss / chi2_dist.ppf(0.025, n) - sigma2
        coverage = np.mean((np.maximum(lower, 0.0) <= theta2) & (theta2 <= upper))
        assert coverage == pytest.approx(0.95, abs=0.002)
        # the function agrees with the vectorized formula
        for k in range(50):
            y = rng.normal(0.0, np.sqrt(theta2 + sigma2), n)
            est = t1_interval(y, sigma2)
            ss_k = float(y @ y)
            assert est.upper == pytest.approx(
                ss_k / chi2_dist.ppf(0.025, n) - sigma2, rel=1e-12
            )

    def test_invalid_alpha(self):
        with pytest.raises(InvalidAlpha):
            t1_interval(np.ones(5), 1.0, alpha=1.5)

    def test_nesting(self):
        y = np.random.default_rng(3).normal(0, 2.0, 50)
        wide = t1_interval(y, 1.0, alpha=0.01)
        narrow = t1_interval(y, 1.0, alpha=0.05)
        assert wide.lower <= narrow.lower and narrow.upper <= wide.upper


class TestBootstrapT1:
    def test_degenerate_input(self):
        with pytest.raises(DegenerateBootstrap):
            bootstrap_t1_interval(np.full(30, 2.0), 1.0, seed=0)

    def test_b_must_be_large(self):
        with pytest.raises(ValueError):
            bootstrap_t1_interval(np.arange(10.0), 1.0, B=10)

    def test_endpoints_stabilize_in_b(self):
        rng = np.random.default_rng(7)
        y = rng.normal(0.0, 2.0, 150)
        est1 = bootstrap_t1_interval(y, 1.0, B=10_000, seed=5)
        est2 = bootstrap_t1_interval(y, 1.0, B=20_000, seed=6)
        scale = max(abs(est1.upper), 1.0)
        assert abs(est1.upper - est2.upper) / scale < 1e-2
        assert abs(est1.lower - est2.lower) / scale < 1e-2

    def test_contains_truth_on_seeded_draw(self):
        rng = np.random.default_rng(42)
        theta2, sigma2, n = 8.0, 2.0, 400
        y = rng.normal(0.0, np.sqrt(theta2 + sigma2), n)
        est = bootstrap_t1_interval(y, sigma2, seed=1)
        assert est.contains(theta2)


class TestEigenPrism:
    def test_constraint_forced_value(self):
        lam = np.array([1.5, 1.5, 0.5, 0.5])
        spec = DesignSpectrum(
            lam=lam, z=np.sqrt(lam), n=4, p=10, y_sq_norm=float(lam.sum())
        )
        est = eigenprism_estimate(spec, THETA_SQUARED)
        assert est.point == pytest.approx(1.0, abs=1e-12)

    def test_pure_noise_unbiased_smoke(self):
        n, p, sigma2, trials = 60, 240, 4.0, 800
        rng = np.random.default_rng(31)
        t2 = np.empty(trials)
        t3 = np.empty(trials)
        for k in range(trials):
            spec = noise_spectrum(rng, n, p, sigma2)
            _, sol2 = eigenprism_with_solution(spec, THETA_SQUARED)
            _, sol3 = eigenprism_with_solution(spec, SIGMA_SQUARED)
            t2[k] = sol2.w @ spec.z**2
            t3[k] = sol3.w @ spec.z**2
        assert abs(t2.mean()) < 4.0 * t2.std() / np.sqrt(trials)
        assert abs(t3.mean() - sigma2) < 4.0 * t3.std() / np.sqrt(trials)

    def test_interval_nesting(self):
        spec = noise_spectrum(np.random.default_rng(9), 80, 400, 1.0, theta2=3.0)
        wide = eigenprism_estimate(spec, THETA_SQUARED, EigenPrismOptions(alpha=0.01))
        narrow = eigenprism_estimate(spec, THETA_SQUARED, EigenPrismOptions(alpha=0.05))
        assert wide.lower <= narrow.lower and narrow.upper <= wide.upper

    def test_width_is_two_z_sd_before_clipping(self):
        spec = noise_spectrum(np.random.default_rng(15), 100, 500, 1.0, theta2=6.0)
        est = eigenprism_estimate(spec, THETA_SQUARED)
        if not (est.clipped_lower or est.clipped_upper):
            z = norm.ppf(0.975)
            assert est.width == pytest.approx(2.0 * z * est.sd_bound, rel=1e-10)
        # clipped lower: width is shorter than the nominal two-sided width
        est2 = eigenprism_estimate(spec, SIGMA_SQUARED)
        assert est2.upper - est2.lower <= 2 * norm.ppf(0.975) * est2.sd_bound + 1e-12

    def test_response_scale_equivariance(self):
        rng = np.random.default_rng(23)
        n, p, c = 60, 300, 3.0
        x = rng.standard_normal((n, p))
        y = rng.normal(0.0, 2.0, n)
        spec1 = spectral_decompose(Dataset(x, y))
        spec2 = spectral_decompose(Dataset(x, c * y))
        _, sol1 = eigenprism_with_solution(spec1, THETA_SQUARED)
        _, sol2 = eigenprism_with_solution(spec2, THETA_SQUARED)
        t_1 = sol1.w @ spec1.z**2
        t_2 = sol2.w @ spec2.z**2
        assert t_2 == pytest.approx(c**2 * t_1, rel=1e-10)
        est1 = eigenprism_estimate(spec1, THETA_SQUARED)
        est2 = eigenprism_estimate(spec2, THETA_SQUARED)
        assert est2.sd_bound == pytest.approx(c**2 * est1.sd_bound, rel=1e-10)
        assert est2.upper == pytest.approx(c**2 * est1.upper, rel=1e-10)
        assert est2.lower == pytest.approx(c**2 * est1.lower, rel=1e-8, abs=1e-12)
        # SNR interval is invariant under response rescaling
        snr1 = snr_interval(spec1)
        snr2 = snr_interval(spec2)
        assert snr2.point == pytest.approx(snr1.point, rel=1e-10)
        assert snr2.width == pytest.approx(snr1.width, rel=1e-10)

    def test_zero_first_pins_leading_weights(self):
        spec = noise_spectrum(np.random.default_rng(5), 50, 200, 1.0, theta2=2.0)
        _, sol = eigenprism_with_solution(
            spec, THETA_SQUARED, EigenPrismOptions(zero_first=3)
        )
        assert np.all(sol.w[:3] == 0.0)

    def test_zero_first_leaves_too_few(self):
        spec = noise_spectrum(np.random.default_rng(5), 10, 20, 1.0)
        with pytest.raises(ValueError):
            eigenprism_estimate(spec, THETA_SQUARED, EigenPrismOptions(zero_first=9))


class TestSnr:
    def test_clamp_to_zero(self):
        lam = np.array([2.0, 1.2, 0.8, 0.4])
        z = np.array([0.1, 0.1, 2.0, 2.0])  # heavy low-spectrum response drives the signal statistic negative
        spec = DesignSpectrum(lam=lam, z=z, n=4, p=8, y_sq_norm=float(z @ z))
        est = snr_interval(spec)
        assert est.point == 0.0
        assert est.lower == 0.0

    def test_clamp_to_one(self):
        lam = np.array([1.5, 1.5, 0.5, 0.5])
        z = np.sqrt(lam)  # statistic = 1 and ||y||^2/n = 1, so the ratio is exactly 1
        spec = DesignSpectrum(lam=lam, z=z, n=4, p=8, y_sq_norm=float(lam.sum()))
        est = snr_interval(spec)
        assert est.point == pytest.approx(1.0, abs=1e-12)
        assert est.upper == 1.0 and est.clipped_upper

    def test_zero_response(self):
        lam = np.array([1.5, 1.0, 0.5])
        spec = DesignSpectrum(lam=lam, z=np.zeros(3), n=3, p=6, y_sq_norm=0.0)
        with pytest.raises(ZeroResponse):
            snr_interval(spec)


class TestTwoStep:
    def test_rho_zero_reduces_to_min_sum_w2(self):
        # low-spectrum response: the first-pass point estimate clips to 0
        lam = np.array([2.0, 1.2, 0.8, 0.4])
        z = np.array([0.1, 0.1, 2.0, 2.0])
        spec = DesignSpectrum(lam=lam, z=z, n=4, p=8, y_sq_norm=float(z @ z))
        step1 = eigenprism_estimate(spec, THETA_SQUARED)
        assert step1.point == 0.0
        est = two_step_interval(spec, THETA_SQUARED)
        ref = solve_weighted_quadratic(lam, np.ones(4), ConstraintSet.for_theta2())
        assert est.point == pytest.approx(
            max(float(ref.w @ z**2), 0.0), abs=1e-12
        )
        scale = spec.y_sq_norm / spec.n
        assert est.sd_bound == pytest.approx(
            np.sqrt(2.0) * scale * np.sqrt(ref.objective), rel=1e-12
        )

    def test_rho_one_reduces_to_lambda_squared_weighting(self):
        lam = np.array([1.5, 1.5, 0.5, 0.5])
        z = 2.0 * np.sqrt(lam)  # statistic/(||y||^2/n) = n/sum(lam) >= 1, so rho_hat clamps to 1
        spec = DesignSpectrum(lam=lam, z=z, n=4, p=8, y_sq_norm=float(z @ z))
        est = two_step_interval(spec, THETA_SQUARED)
        ref = solve_weighted_quadratic(lam, lam**2, ConstraintSet.for_theta2())
        assert est.point == pytest.approx(max(float(ref.w @ z**2), 0.0), rel=1e-10)

    def test_degenerate_falls_back_with_warning(self):
        lam = np.array([1.5, 1.0, 0.5])
        spec = DesignSpectrum(lam=lam, z=np.zeros(3), n=3, p=6, y_sq_norm=0.0)
        with pytest.warns(RuntimeWarning):
            est = two_step_interval(spec, THETA_SQUARED)
        assert est.width == 0.0

    def test_two_step_not_wider_on_average(self):
        rng = np.random.default_rng(44)
        n, p, theta2, sigma2 = 100, 500, 5.0, 5.0
        plain_w, twostep_w = [], []
        for _ in range(150):
            spec = noise_spectrum(rng, n, p, sigma2, theta2=theta2)
            plain_w.append(eigenprism_estimate(spec, THETA_SQUARED).width)
            twostep_w.append(two_step_interval(spec, THETA_SQUARED).width)
        assert np.mean(twostep_w) < np.mean(plain_w)


class TestRegressionError:
    def test_zero_estimate_reduces_to_theta_interval(self):
        rng = np.random.default_rng(2)
        n, p = 40, 120
        x = rng.standard_normal((n, p))
        y = rng.normal(0.0, 1.5, n)
        data = Dataset(x, y)
        est = regression_error_interval(data, np.zeros(p))
        base = eigenprism_estimate(spectral_decompose(data), THETA_SQUARED)
        assert est.point == pytest.approx(np.sqrt(base.point), rel=1e-12)
        assert est.upper == pytest.approx(np.sqrt(base.upper), rel=1e-12)
        assert est.estimand == "error_l2"

    def test_beta_hat_length_checked(self):
        data = Dataset(np.ones((3, 4)), np.zeros(3))
        with pytest.raises(DimensionMismatch):
            regression_error_interval(data, np.zeros(5))

    def test_perfect_estimate_centers_at_zero(self):
        # residual model has theta = 0: raw statistic averages to 0, lower clips to 0
        rng = np.random.default_rng(77)
        n, p, trials = 100, 400, 1500
        beta = rng.standard_normal(p)
        stats = np.empty(trials)
        for k in range(trials):
            x = rng.standard_normal((n, p))
            y = x @ beta + rng.normal(0.0, 1.0, n)
            resid = y - x @ beta
            spec = spectral_decompose(Dataset(x, resid))
            _, sol = eigenprism_with_solution(spec, THETA_SQUARED)
            stats[k] = sol.w @ spec.z**2
        assert abs(stats.mean()) < 3.5 * stats.std() / np.sqrt(trials)
        # the public interval on one draw clips its lower endpoint to zero
        x = rng.standard_normal((n, p))
        y = x @ beta + rng.normal(0.0, 1.0, n)
        est = regression_error_interval(Dataset(x, y), beta)
        assert est.lower == 0.0

    def test_single_index_subset_covers_known_offset(self):
        rng = np.random.default_rng(101)
        n, p, delta, trials = 200, 1000, 5.0, 1000
        hits = 0
        for k in range(trials):
            x = rng.standard_normal((n, p))
            beta = rng.standard_normal(p)
            beta_hat = beta.copy()
            beta_hat[7] += delta  # estimand |delta| on subset {7}
            y = x @ beta + rng.normal(0.0, 1.0, n)
            est = regression_error_interval(Dataset(x, y), beta_hat, subset=[7])
            hits += est.contains(delta)
        assert hits / trials >= 0.935


class TestExactConditionalVariance:
    def test_noise_only_term(self):
        w = np.array([0.2, -0.1, 0.4])
        lam = np.array([1.5, 1.0, 0.5])
        sigma2 = 2.0
        got = exact_conditional_variance(w, lam, 0.0, sigma2, 100)
        assert got == pytest.approx(2.0 * sigma2**2 * float(w @ w), rel=1e-12)

    def test_signal_only_term(self):
        lam = np.array([2.0, 1.0, 0.5, 0.25])
        sol = solve_minmax(lam, ConstraintSet.for_theta2())
        w = sol.w
        p, theta2 = 50, 3.0
        got = exact_conditional_variance(w, lam, theta2, 0.0, p)
        expect = 2.0 * theta2**2 * (
            p / (p + 2.0) * float(w**2 @ lam**2) - 1.0 / (p + 2.0)
        )
        assert got == pytest.approx(expect, rel=1e-12)

    def test_bound_dominance(self):
        rng = np.random.default_rng(55)
        for seed in range(10):
            x = np.random.default_rng(seed).standard_normal((30, 120))
            lam = np.sort(np.linalg.eigvalsh(x @ x.T / 120))[::-1]
            sol = solve_minmax(lam, ConstraintSet.for_theta2())
            theta2, sigma2 = rng.uniform(0.1, 5.0, 2)
            exact = exact_conditional_variance(sol.w, lam, theta2, sigma2, 120)
            bound = 2.0 * (theta2 + sigma2) ** 2 * sol.objective
            assert exact <= bound * (1.0 + 1e-12)

    def test_matches_monte_carlo_smoke(self):
        # small-draw version of the full variance-oracle acceptance check
        n, p, theta2, sigma2 = 50, 200, 3.0, 2.0
        rng = np.random.default_rng(8)
        x = rng.standard_normal((n, p))
        lam = np.sort(np.linalg.eigvalsh(x @ x.T / p))[::-1]
        sol = solve_minmax(lam, ConstraintSet.for_theta2())
        d = np.sqrt(lam * p)
        draws = 30_000
        u = rng.standard_normal((draws, p))
        proj = theta2**0.5 * u[:, :n] / np.linalg.norm(u, axis=1, keepdims=True)
        z = d * proj + rng.normal(0.0, np.sqrt(sigma2), (draws, n))
        s = (z**2) @ sol.w
        formula = exact_conditional_variance(sol.w, lam, theta2, sigma2, p)
        assert s.var() == pytest.approx(formula, rel=0.10)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            exact_conditional_variance(np.ones(3), np.ones(4), 1.0, 1.0, 10)
        with pytest.raises(DimensionMismatch):
            exact_conditional_variance(np.ones(3), np.ones(3), 1.0, 1.0, 2)
