"""Marchenko-Pastur utilities: density, median-split constants, width bounds.

The limiting spectrum of X X^T / p for an i.i.d. standard design with aspect
ratio gamma = n/p in (0, 1) has density

    f(x) = sqrt((hi - x)(x - lo)) / (2 pi gamma x)   on [lo, hi],

lo = (1 - sqrt(gamma))^2, hi = (1 + sqrt(gamma))^2, with mean 1 and second
moment 1 + gamma.  Integrals against f have inverse-square-root edges, so all
quadrature here substitutes x = lo + (hi - lo) sin^2(t), which makes the
transformed integrand smooth, and then applies Gauss-Legendre.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidGamma, NormalizationError

_QUAD_NODES = 600
_nodes, _weights = np.polynomial.legendre.leggauss(_QUAD_NODES)


@dataclass(frozen=True)
class MPModel:
    """Aspect ratio gamma with the derived spectral constants.

    ``median`` is the distribution median, ``A`` the median-split mean
    E[Y * (1{Y >= median} - 1{Y < median})] (equivalently E|Y - median|) and
    ``B`` the second moment E[Y^2] = 1 + gamma.
    """

    gamma: float
    support_lo: float
    support_hi: float
    median: float
    A: float
    B: float


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise InvalidGamma(f"gamma must lie in (0, 1), got {gamma}")
    return gamma


def mp_support(gamma: float) -> tuple[float, float]:
    gamma = _check_gamma(gamma)
    s = np.sqrt(gamma)
    return (1.0 - s) ** 2, (1.0 + s) ** 2


def mp_pdf(gamma: float, x) -> np.ndarray | float:
    """Density of the Marchenko-Pastur law, zero outside its support."""
    gamma = _check_gamma(gamma)
    lo, hi = mp_support(gamma)
    x = np.asarray(x, dtype=float)
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xs = x[inside]
    out[inside] = np.sqrt((hi - xs) * (xs - lo)) / (2.0 * np.pi * gamma * xs)
    return out if out.ndim else float(out)


def _integrate(gamma: float, g, a: float, b: float) -> float:
    """Integral of g(x) * pdf(x) over [a, b] via the sin^2 substitution."""
    lo, hi = mp_support(gamma)
    a = min(max(a, lo), hi)
    b = min(max(b, lo), hi)
    if b <= a:
        return 0.0
    ta = np.arcsin(np.sqrt((a - lo) / (hi - lo)))
    tb = np.arcsin(np.sqrt((b - lo) / (hi - lo)))
    t = 0.5 * (tb - ta) * _nodes + 0.5 * (tb + ta)
    wts = 0.5 * (tb - ta) * _weights
    sin_t, cos_t = np.sin(t), np.cos(t)
    x = lo + (hi - lo) * sin_t**2
    # pdf(x) * dx/dt = (hi-lo)^2 sin^2 cos^2 / (pi gamma x)
    kernel = (hi - lo) ** 2 * (sin_t * cos_t) ** 2 / (np.pi * gamma * x)
    return float(np.sum(g(x) * kernel * wts))


def mp_cdf(gamma: float, x: float) -> float:
    lo, _ = mp_support(gamma)
    return _integrate(gamma, lambda s: np.ones_like(s), lo, float(x))


@lru_cache(maxsize=64)
def mp_model(gamma: float) -> MPModel:
    """Build the full constant set for an aspect ratio.

    The median solves CDF(m) = 1/2 to 1e-12; A and B come from quadrature
    split at the median.
    """
    gamma = _check_gamma(gamma)
    lo, hi = mp_support(gamma)
    span = hi - lo
    median = brentq(
        lambda x: mp_cdf(gamma, x) - 0.5,
        lo + 1e-12 * span,
        hi - 1e-12 * span,
        xtol=1e-13,
        rtol=1e-15,
    )
    ident = lambda x: x
    a_const = _integrate(gamma, ident, median, hi) - _integrate(gamma, ident, lo, median)
    b_const = _integrate(gamma, lambda x: x * x, lo, hi)
    return MPModel(
        gamma=gamma,
        support_lo=lo,
        support_hi=hi,
        median=float(median),
        A=float(a_const),
        B=float(b_const),
    )


def are_upper_bound(gamma: float) -> float:
    """Closed-form asymptotic width bound sqrt(2) * max(1/A, sqrt(B)/A)."""
    model = mp_model(_check_gamma(gamma))
    return float(np.sqrt(2.0) * max(1.0 / model.A, np.sqrt(model.B) / model.A))


def indistinguishability_bound(lam: np.ndarray, n: int, p: int) -> float:
    """Lower bound on type-I + type-II error of any pure-noise-vs-signal test.

    Requires the normalization sum(lam) = n (within 1e-6) and p >= n.
    Returns 1 - (sqrt(sum (lam - 1)^2 / 8) + sqrt((n/p) / (4 pi))), floored at
    zero; values near 1 mean no test can reliably distinguish rho = 0 from
    rho = 1/2 on this spectrum.
    """
    lam = np.asarray(lam, dtype=float)
    if p < n:
        raise NormalizationError(f"requires p >= n, got n={n}, p={p}")
    total = float(lam.sum())
    if abs(total - n) > 1e-6:
        raise NormalizationError(
            f"sum of eigenvalues must equal n={n} (within 1e-6), got {total}"
        )
    deviation = np.sqrt(float(((lam - 1.0) ** 2).sum()) / 8.0)
    aspect = np.sqrt((n / p) / (4.0 * np.pi))
    return max(0.0, 1.0 - (deviation + aspect))
