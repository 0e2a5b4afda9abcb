"""Exact optimal transport between small discrete distributions.

The general solver poses the transport LP on the dense bipartite instance
and hands it to HiGHS. Squared costs are used throughout, so every value
returned here is a squared 2-Wasserstein distance unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

MAX_EXACT_ALPHABET = 64
MARGINAL_TOL = 1e-9
VALUE_TOL = 1e-9


class CapabilityError(ValueError):
    """The instance is outside the exact-solver envelope."""


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability weights over the alphabet ``{1, ..., A}``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a nonempty 1-D array")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def alphabet_size(self) -> int:
        return self.weights.size

    @classmethod
    def normalized(cls, weights) -> "DiscreteDistribution":
        w = np.asarray(weights, dtype=float)
        return cls(w / math.fsum(w))


@dataclass(frozen=True)
class CostMatrix:
    """Ground cost between symbols: zero diagonal, positive symmetric off-diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        c = np.array(self.entries, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise ValueError("cost must be a square matrix")
        if np.any(np.diag(c) != 0):
            raise ValueError("cost diagonal must be zero")
        if not np.array_equal(c, c.T):
            raise ValueError("cost must be symmetric")
        off = ~np.eye(c.shape[0], dtype=bool)
        if np.any(c[off] <= 0) or not np.all(np.isfinite(c)):
            raise ValueError("off-diagonal costs must be finite and positive")
        c.setflags(write=False)
        object.__setattr__(self, "entries", c)

    @classmethod
    def uniform(cls, A: int, value: float = 1.0) -> "CostMatrix":
        c = np.full((A, A), float(value))
        np.fill_diagonal(c, 0.0)
        return cls(c)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def _off_diagonal(self) -> np.ndarray:
        return self.entries[~np.eye(self.size, dtype=bool)]

    @property
    def d_min(self) -> float:
        off = self._off_diagonal()
        return float(off.min()) if off.size else 0.0

    @property
    def d_max(self) -> float:
        off = self._off_diagonal()
        return float(off.max()) if off.size else 0.0

    @property
    def is_uniform(self) -> bool:
        return self.d_min == self.d_max


@dataclass(frozen=True)
class TransportPlan:
    mass: np.ndarray

    @property
    def size(self) -> int:
        return self.mass.shape[0]


def _weights(x) -> np.ndarray:
    if isinstance(x, DiscreteDistribution):
        return x.weights
    return DiscreteDistribution(x).weights


def _costs(d) -> np.ndarray:
    if isinstance(d, CostMatrix):
        return d.entries
    return CostMatrix(d).entries


def _solve_transport(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> np.ndarray:
    m, n = cost.shape
    if m == 1 or n == 1:
        return np.outer(a, b)
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([a, b])
    # one marginal constraint is implied by the others
    res = linprog(
        cost.ravel(),
        A_eq=A_eq[:-1],
        b_eq=b_eq[:-1],
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return np.clip(res.x.reshape(m, n), 0.0, None)


def w2sq_exact(mu, nu, d) -> tuple[float, TransportPlan]:
    """Squared 2-Wasserstein distance under the cost matrix ``d``, solved exactly.

    Returns the optimal value together with an optimal coupling. Zero-mass
    source and target symbols are dropped before the LP is built.
    """
    a, b, cost = _weights(mu), _weights(nu), _costs(d)
    A = cost.shape[0]
    if a.size != A or b.size != A:
        raise ValueError(f"dimension mismatch: mu has {a.size}, nu has {b.size}, cost is {A}x{A}")
    if A > MAX_EXACT_ALPHABET:
        raise CapabilityError(f"alphabet size {A} exceeds exact-solver envelope {MAX_EXACT_ALPHABET}")
    plan = np.zeros((A, A))
    if np.array_equal(a, b):
        np.fill_diagonal(plan, a)
        return 0.0, TransportPlan(plan)
    rows, cols = np.flatnonzero(a > 0), np.flatnonzero(b > 0)
    sq = cost**2
    sub = _solve_transport(a[rows], b[cols], sq[np.ix_(rows, cols)])
    plan[np.ix_(rows, cols)] = sub
    return float(math.fsum((sq * plan).ravel())), TransportPlan(plan)


def w2sq_uniform(mu, nu, d_val: float) -> float:
    """Closed form under a uniform off-diagonal cost: ``(d^2 / 2) * sum_i |mu_i - nu_i|``."""
    a, b = _weights(mu), _weights(nu)
    if a.size != b.size:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    if d_val <= 0:
        raise ValueError("d_val must be positive")
    return 0.5 * d_val**2 * math.fsum(np.abs(a - b))


def wp_p_sorted(x, y, p: float = 2.0) -> float:
    """``W_p^p`` between two equal-size empirical measures on the line."""
    xs, ys = np.sort(np.asarray(x, dtype=float)), np.sort(np.asarray(y, dtype=float))
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("x and y must be 1-D with the same size")
    if p < 1:
        raise ValueError("p must be >= 1")
    return math.fsum(np.abs(xs - ys) ** p) / xs.size


def wp_p_weighted(x, wx, y, wy, p: float = 2.0) -> float:
    """``W_p^p`` between weighted point-mass measures on the line.

    Uses the monotone (quantile) coupling, which is optimal for the convex
    cost ``|u - v|^p`` with ``p >= 1``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    x, wx = np.asarray(x, dtype=float), np.asarray(wx, dtype=float)
    y, wy = np.asarray(y, dtype=float), np.asarray(wy, dtype=float)
    if x.shape != wx.shape or y.shape != wy.shape:
        raise ValueError("values and weights must have matching shapes")
    ox, oy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    x, wx, y, wy = x[ox], wx[ox] / wx.sum(), y[oy], wy[oy] / wy.sum()
    cx, cy = np.cumsum(wx), np.cumsum(wy)
    cx[-1] = cy[-1] = 1.0
    levels = np.union1d(cx, cy)
    widths = np.diff(np.concatenate([[0.0], levels]))
    # quantile index at the midpoint of each constant piece
    mids = levels - 0.5 * widths
    ix = np.minimum(np.searchsorted(cx, mids, side="right"), x.size - 1)
    iy = np.minimum(np.searchsorted(cy, mids, side="right"), y.size - 1)
    return math.fsum(widths * np.abs(x[ix] - y[iy]) ** p)


def sandwich_bounds(mu, nu, d) -> tuple[float, float, float]:
    """Uniform-cost bounds around the exact value: ``(d_min case, exact, d_max case)``."""
    cost = d if isinstance(d, CostMatrix) else CostMatrix(d)
    mid, _ = w2sq_exact(mu, nu, cost)
    if cost.size == 1:
        return 0.0, mid, 0.0
    return w2sq_uniform(mu, nu, cost.d_min), mid, w2sq_uniform(mu, nu, cost.d_max)
