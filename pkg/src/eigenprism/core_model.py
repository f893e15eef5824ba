"""Dataset and spectral-summary types plus the transformations feeding them.

The estimators in this package never look at the raw design matrix: everything
runs on the eigenvalues of X X^T / p and the rotated response z = U^T y.  This
module owns that reduction, along with column standardization, whitening by a
known covariance, and deterministic sample splitting.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantColumn,
    DimensionError,
    DimensionMismatch,
    EmptySplit,
    NotPositiveDefinite,
)

# Eigenvalues below this fraction of the largest are treated as exact zeros
# (rank deficiency from centering, not signal).
EIGENVALUE_CLAMP = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Observed design matrix X (n x p) and response y (length n)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise DimensionMismatch(f"X must be 2-D, got ndim={X.ndim}")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"X has {X.shape[0]} rows but y has length {y.shape[0]}"
            )
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionError("X must have at least one row and one column")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DimensionMismatch("X and y must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class CovarianceSpec:
    """Known column covariance: identity, or an explicit symmetric PD matrix."""

    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.matrix is None:
            return
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NotPositiveDefinite("covariance matrix must be square")
        if not np.allclose(m, m.T, rtol=0, atol=1e-10 * max(1.0, np.abs(m).max())):
            raise NotPositiveDefinite("covariance matrix must be symmetric")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "CovarianceSpec":
        return cls(None)

    @classmethod
    def explicit(cls, matrix: np.ndarray) -> "CovarianceSpec":
        return cls(matrix)

    @property
    def is_identity(self) -> bool:
        return self.matrix is None


@dataclass(frozen=True)
class DesignSpectrum:
    """Spectral summary consumed by every estimator.

    ``lam`` holds the eigenvalues of X X^T / p sorted non-increasing, ``z`` the
    response rotated by the corresponding orthonormal eigenvectors of X X^T.
    Only z_i^2 ever enters a statistic, so the eigenvector signs are fixed by
    convention (largest-magnitude entry positive) purely for reproducibility.
    """

    lam: np.ndarray
    z: np.ndarray
    n: int
    p: int
    y_sq_norm: float

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if lam.shape != (self.n,) or z.shape != (self.n,):
            raise DimensionMismatch("lam and z must both have length n")
        if np.any(lam < 0) or np.any(np.diff(lam) > 0):
            raise DimensionMismatch("lam must be non-negative and non-increasing")
        zz = float(z @ z)
        if abs(zz - self.y_sq_norm) > 1e-10 * max(1.0, self.y_sq_norm):
            raise DimensionMismatch("sum of z^2 does not match ||y||^2")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "z", z)


def standardize_columns(data: Dataset) -> Dataset:
    """Center each column and scale to unit empirical variance (divisor n-1).

    Raises ``ConstantColumn`` for any column with zero variance.  The response
    is returned unchanged.
    """
    X = data.X
    mean = X.mean(axis=0)
    centered = X - mean
    var = (centered**2).sum(axis=0) / max(data.n - 1, 1)
    dead = np.flatnonzero(var <= 0.0)
    if dead.size:
        raise ConstantColumn(int(dead[0]))
    return Dataset(centered / np.sqrt(var), data.y)


def whiten(data: Dataset, cov: CovarianceSpec) -> Dataset:
    """Replace X by X Sigma^{-1/2} using the symmetric inverse square root.

    The identity variant returns the input unchanged.  Raises
    ``NotPositiveDefinite`` if the smallest eigenvalue of Sigma is not
    strictly positive.
    """
    if cov.is_identity:
        return data
    sigma = cov.matrix
    if sigma.shape[0] != data.p:
        raise DimensionMismatch(
            f"covariance is {sigma.shape[0]}x{sigma.shape[0]} but X has p={data.p}"
        )
    vals, vecs = np.linalg.eigh(sigma)
    tol = 1e-12 * max(1.0, float(vals[-1]))
    if vals[0] <= tol:
        raise NotPositiveDefinite(
            f"smallest covariance eigenvalue {vals[0]:.3e} below tolerance"
        )
    inv_root = (vecs / np.sqrt(vals)) @ vecs.T
    return Dataset(data.X @ inv_root, data.y)


def spectral_decompose(data: Dataset) -> DesignSpectrum:
    """Reduce a dataset to (lam, z) via the Gram matrix X X^T.

    Works on the n x n Gram matrix only, never the p x p one, so the cost is
    n^2 p for the product plus n^3 for the eigendecomposition.  Requires
    n <= p; the classical n > p regime is rejected with ``DimensionError``.
    """
    if data.n > data.p:
        raise DimensionError(
            f"spectral_decompose requires n <= p, got n={data.n}, p={data.p}"
        )
    return _decompose(data)


def _decompose(data: Dataset) -> DesignSpectrum:
    # regime-free variant: the error interval on a coefficient subset can have
    # fewer columns than rows, where the n - p zero eigenvalues are structural
    gram = (data.X @ data.X.T) / data.p
    vals, vecs = np.linalg.eigh(gram)
    order = np.argsort(vals)[::-1]
    lam = vals[order]
    U = vecs[:, order]
    # sign convention: largest-magnitude entry of each eigenvector positive
    anchor = np.abs(U).argmax(axis=0)
    signs = np.sign(U[anchor, np.arange(data.n)])
    signs[signs == 0] = 1.0
    U = U * signs
    lam = np.where(lam < EIGENVALUE_CLAMP * max(lam[0], 0.0), 0.0, lam)
    z = U.T @ data.y
    return DesignSpectrum(
        lam=lam, z=z, n=data.n, p=data.p, y_sq_norm=float(data.y @ data.y)
    )


def split_sample(data: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Partition the rows into two disjoint subsamples, deterministic in seed.

    The first part receives round(fraction * n) rows (half-up rounding); both
    parts must be nonempty or ``EmptySplit`` is raised.  Row order within each
    part follows the original dataset.
    """
    if not 0.0 < fraction < 1.0:
        raise EmptySplit(f"fraction must lie in (0, 1), got {fraction}")
    n = data.n
    k = int(np.floor(fraction * n + 0.5))
    if k == 0 or k == n:
        raise EmptySplit(f"split of {n} rows at fraction {fraction} leaves an empty part")
    perm = np.random.default_rng(seed).permutation(n)
    first = np.sort(perm[:k])
    second = np.sort(perm[k:])
    return (
        Dataset(data.X[first], data.y[first]),
        Dataset(data.X[second], data.y[second]),
    )
