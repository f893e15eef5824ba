"""Convex weight optimization for the spectral contrast statistics.

Two programs are solved here.  The min-max program picks weights minimizing
max(sum w_i^2, sum w_i^2 lam_i^2) subject to two linear equality constraints
(sum w_i and sum w_i lam_i pinned to the targets that make the weighted sum of
z_i^2 unbiased for the signal or the noise level).  The weighted-quadratic
program minimizes sum c_i w_i^2 under the same constraints and serves both as
the inner kernel of the min-max dual and as the refinement step of the 2-step
procedure.

The min-max is solved without a conic solver: writing
max(a, b) = max_{delta in [0,1]} delta*a + (1-delta)*b turns it into
maximizing the concave scalar dual

    f(delta) = min_w  delta*sum w^2 + (1-delta)*sum w^2 lam^2   (s.t. constraints)

over delta, where each inner minimum is a closed-form 2x2 Lagrange solve with
c_i = delta + (1-delta)*lam_i^2.  A dense grid seeds the search; an interior
maximum is then pinned by root-finding the envelope derivative (the
difference of the two quadratic forms), with golden-section as the fallback
for boundary or flat tops.  The duality gap certifies the result.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateDual, SingularSystem

DELTA_MIN = 1e-10  # keeps c_i > 0 when some lam_i are exactly zero
GRID_POINTS = 1024
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ConstraintSet:
    """Linear equality targets (sum w, sum w*lam) plus indices pinned to zero.

    The admissible target pairs are (0, 1) for the signal-magnitude program
    and (1, 0) for the noise-level program.  ``forced_zero`` holds 0-based
    indices whose weight is removed from the system and re-inserted as an
    exact zero.
    """

    sum_target: float
    lam_target: float
    forced_zero: frozenset = frozenset()

    def __post_init__(self):
        if (self.sum_target, self.lam_target) not in {(0.0, 1.0), (1.0, 0.0)}:
            raise ValueError(
                "targets must be (0, 1) for theta^2 or (1, 0) for sigma^2"
            )
        fz = frozenset(int(i) for i in self.forced_zero)
        if any(i < 0 for i in fz):
            raise ValueError("forced_zero indices must be non-negative")
        object.__setattr__(self, "forced_zero", fz)

    @classmethod
    def for_theta2(cls, forced_zero=()) -> "ConstraintSet":
        return cls(0.0, 1.0, frozenset(forced_zero))

    @classmethod
    def for_sigma2(cls, forced_zero=()) -> "ConstraintSet":
        return cls(1.0, 0.0, frozenset(forced_zero))


@dataclass(frozen=True)
class WeightSolution:
    """Optimized weights with objective value and dual certificates.

    ``delta`` is the optimal dual weight on sum w^2 (min-max mode only; None
    for plain weighted-quadratic solves).  ``kappa1``/``kappa2`` are the
    multipliers of the two equality constraints: every free weight satisfies
    w_i * 2 c_i + kappa1 + kappa2 * lam_i = 0.
    """

    w: np.ndarray
    objective: float
    delta: float | None
    kappa1: float
    kappa2: float


def _free_mask(n: int, constraints: ConstraintSet) -> np.ndarray:
    if any(i >= n for i in constraints.forced_zero):
        raise ValueError("forced_zero index out of range")
    mask = np.ones(n, dtype=bool)
    if constraints.forced_zero:
        mask[list(constraints.forced_zero)] = False
    return mask


def _solve_moments(s0, s1, s2, sum_t, lam_t):
    """Solve the 2x2 moment system for the Lagrange pair (mu1, mu2)."""
    det = s0 * s2 - s1 * s1
    if not det > max(1e-14, 1e-14 * s0 * s2):
        raise SingularSystem(
            "eigenvalues are effectively constant on the free indices"
        )
    mu1 = (sum_t * s2 - lam_t * s1) / det
    mu2 = (lam_t * s0 - sum_t * s1) / det
    return mu1, mu2


def solve_weighted_quadratic(
    lam: np.ndarray, c: np.ndarray, constraints: ConstraintSet
) -> WeightSolution:
    """Minimize sum c_i w_i^2 subject to the two equality constraints.

    The solution has the closed form w_i = (mu1 + mu2 lam_i) / (2 c_i) on free
    indices, with (mu1, mu2) from the 2x2 moment system.  Raises
    ``SingularSystem`` when the free eigenvalues are effectively constant.
    """
    lam = np.asarray(lam, dtype=float)
    c = np.asarray(c, dtype=float)
    if c.shape != lam.shape:
        raise ValueError("c and lam must have the same length")
    free = _free_mask(lam.size, constraints)
    lam_f, c_f = lam[free], c[free]
    if np.any(c_f <= 0):
        raise ValueError("c must be strictly positive on free indices")
    h = 0.5 / c_f
    s0 = float(h.sum())
    s1 = float(h @ lam_f)
    s2 = float(h @ (lam_f * lam_f))
    mu1, mu2 = _solve_moments(s0, s1, s2, constraints.sum_target, constraints.lam_target)
    w = np.zeros(lam.size)
    w[free] = (mu1 + mu2 * lam_f) * h
    objective = float(c_f @ (w[free] ** 2))
    return WeightSolution(w=w, objective=objective, delta=None, kappa1=-mu1, kappa2=-mu2)


def _dual_on_grid(lam_f, lam_f_sq, deltas, sum_t, lam_t):
    """Vectorized dual values f(delta) over a grid (chunked to bound memory)."""
    out = np.empty(deltas.size)
    chunk = max(1, (1 << 22) // max(lam_f.size, 1))
    for start in range(0, deltas.size, chunk):
        d = deltas[start : start + chunk, None]
        h = 0.5 / (d + (1.0 - d) * lam_f_sq[None, :])
        s0 = h.sum(axis=1)
        s1 = h @ lam_f
        s2 = h @ lam_f_sq
        det = s0 * s2 - s1 * s1
        if np.any(det <= np.maximum(1e-14, 1e-14 * s0 * s2)):
            raise SingularSystem(
                "eigenvalues are effectively constant on the free indices"
            )
        mu1 = (sum_t * s2 - lam_t * s1) / det
        mu2 = (lam_t * s0 - sum_t * s1) / det
        # inner minimum value: (mu1 * sum_t + mu2 * lam_t) / 2
        out[start : start + chunk] = 0.5 * (mu1 * sum_t + mu2 * lam_t)
    return out


def solve_minmax(
    lam: np.ndarray,
    constraints: ConstraintSet,
    *,
    grid_points: int = GRID_POINTS,
    delta_min: float = DELTA_MIN,
) -> WeightSolution:
    """Solve min over w of max(sum w^2, sum w^2 lam^2) under the constraints.

    Maximizes the concave dual f(delta) over [delta_min, 1]: a ``grid_points``
    seed grid locates the bracket, then an interior optimum is refined by
    root-finding f' (golden-section when the optimum sits on the boundary).
    Every inner problem is a closed-form weighted-quadratic solve.  The
    returned objective is the primal max-form evaluated at the optimal
    weights, and the duality gap |primal - f(delta*)| is at most
    1e-7 * (1 + primal).

    Raises ``SingularSystem`` if the free eigenvalues are effectively
    constant, ``DegenerateDual`` if no dual point admits a solvable inner
    system.
    """
    lam = np.asarray(lam, dtype=float)
    free = _free_mask(lam.size, constraints)
    lam_f = lam[free]
    lam_f_sq = lam_f * lam_f
    sum_t, lam_t = constraints.sum_target, constraints.lam_target

    def inner(delta):
        h = 0.5 / (delta + (1.0 - delta) * lam_f_sq)
        s0 = float(h.sum())
        s1 = float(h @ lam_f)
        s2 = float(h @ lam_f_sq)
        mu1, mu2 = _solve_moments(s0, s1, s2, sum_t, lam_t)
        return 0.5 * (mu1 * sum_t + mu2 * lam_t), mu1, mu2, h

    def form_gap(delta):
        # envelope derivative f'(delta) = sum w^2 - sum w^2 lam^2, decreasing
        _, mu1, mu2, h = inner(delta)
        wf = (mu1 + mu2 * lam_f) * h
        return float(wf @ wf) - float((wf * lam_f) @ (wf * lam_f))

    grid = np.linspace(delta_min, 1.0, grid_points)
    f_grid = _dual_on_grid(lam_f, lam_f_sq, grid, sum_t, lam_t)
    if not np.all(np.isfinite(f_grid)):
        raise DegenerateDual("dual evaluation failed across the grid")
    best = int(np.argmax(f_grid))  # first occurrence = smallest maximizing delta

    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, grid_points - 1)]
    gap_a, gap_b = form_gap(a), form_gap(b)
    if gap_a > 0.0 > gap_b:
        # interior maximum: equalize the two quadratic forms exactly
        delta = float(brentq(form_gap, a, b, xtol=1e-15, rtol=8.9e-16))
    else:
        # boundary or flat top: golden-section on the dual itself
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1 = inner(x1)[0]
        f2 = inner(x2)[0]
        for _ in range(120):
            if b - a < 1e-12:
                break
            if f1 < f2:
                a, x1, f1 = x1, x2, f2
                x2 = a + _GOLDEN * (b - a)
                f2 = inner(x2)[0]
            else:
                b, x2, f2 = x2, x1, f1
                x1 = b - _GOLDEN * (b - a)
                f1 = inner(x1)[0]
        refined = 0.5 * (a + b)
        f_refined = inner(refined)[0]
        # keep the better of grid seed and refinement; ties go to smaller delta
        if f_refined > f_grid[best] or (
            f_refined == f_grid[best] and refined < grid[best]
        ):
            delta = float(refined)
        else:
            delta = float(grid[best])

    dual_value, mu1, mu2, h = inner(delta)
    w = np.zeros(lam.size)
    w[free] = (mu1 + mu2 * lam_f) * h
    wf = w[free]
    primal = max(float(wf @ wf), float((wf * lam_f) @ (wf * lam_f)))
    return WeightSolution(w=w, objective=primal, delta=delta, kappa1=-mu1, kappa2=-mu2)


def kkt_residual(
    lam: np.ndarray, sol: WeightSolution, constraints: ConstraintSet
) -> float:
    """Stationarity plus constraint residual of a min-max solution.

    Returns max over free i of |w_i (2 delta + 2 (1-delta) lam_i^2) + kappa1 +
    kappa2 lam_i| plus the absolute violations of the two equality constraints
    and of the forced zeros.  A certified solution stays below 1e-8.
    """
    if sol.delta is None:
        raise ValueError("kkt_residual requires a min-max solution (delta set)")
    lam = np.asarray(lam, dtype=float)
    free = _free_mask(lam.size, constraints)
    w, d = sol.w, sol.delta
    grad = w[free] * (2.0 * d + 2.0 * (1.0 - d) * lam[free] ** 2)
    stationarity = float(
        np.abs(grad + sol.kappa1 + sol.kappa2 * lam[free]).max(initial=0.0)
    )
    violation = abs(float(w.sum()) - constraints.sum_target)
    violation += abs(float(w @ lam) - constraints.lam_target)
    if constraints.forced_zero:
        violation += float(np.abs(w[list(constraints.forced_zero)]).max())
    return stationarity + violation
