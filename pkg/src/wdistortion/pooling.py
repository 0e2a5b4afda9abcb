"""Pooling PMFs over integer offsets.

A pooling PMF ``q_sigma(k)`` weights the neighbours of an index when the
local feature distribution is formed. Three kinds are supported: the
two-sided geometric family, the Kronecker delta (zero pooling width) and
small symmetric lookup tables used by brute-force oracles.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

DEFAULT_TOL = 1e-10
TABLE_RENORM_WARN = 1e-9


class PoolingKind(enum.Enum):
    TWO_SIDED_GEOMETRIC = "two_sided_geometric"
    KRONECKER_DELTA = "kronecker_delta"
    CUSTOM_TABLE = "custom_table"


class InsufficientHorizonError(ValueError):
    """Raised when a truncated sum would need offsets beyond the available horizon."""


@dataclass(frozen=True)
class PoolingPmf:
    """Immutable pooling PMF.

    For ``CUSTOM_TABLE`` the ``table`` holds the one-sided weights for
    ``k = 0, 1, ..., M``; negative offsets mirror them.
    """

    kind: PoolingKind
    sigma: float = 0.0
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a finite nonnegative real, got {self.sigma!r}")
        if self.kind is PoolingKind.CUSTOM_TABLE:
            if not self.table:
                raise ValueError("CUSTOM_TABLE requires a nonempty table")
            w = np.asarray(self.table, dtype=float)
            if np.any(w < 0):
                raise ValueError("table weights must be nonnegative")
            if np.any(np.diff(w) > 0):
                raise ValueError("table weights must be nonincreasing in |k| (monotonicity)")
            total = w[0] + 2.0 * w[1:].sum()
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"table weights sum to {total!r}, expected 1")
        elif self.table is not None:
            raise ValueError("table is only valid for CUSTOM_TABLE")

    @classmethod
    def geometric(cls, sigma: float) -> "PoolingPmf":
        return cls(PoolingKind.TWO_SIDED_GEOMETRIC, float(sigma))

    @classmethod
    def delta(cls) -> "PoolingPmf":
        return cls(PoolingKind.KRONECKER_DELTA, 0.0)

    @classmethod
    def from_table(cls, one_sided: Sequence[float], sigma: float = 0.0) -> "PoolingPmf":
        """Build a table PMF from one-sided weights, renormalizing them.

        A warning is issued when the renormalization moves the total mass by
        more than ``1e-9``.
        """
        w = np.asarray(one_sided, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("one-sided table must be a nonempty 1-D sequence")
        total = w[0] + 2.0 * w[1:].sum()
        if total <= 0:
            raise ValueError("table has no mass")
        if abs(total - 1.0) > TABLE_RENORM_WARN:
            warnings.warn(
                f"pooling table renormalized (total mass was {total:.12g})",
                stacklevel=2,
            )
        w = w / total
        # fold the residual rounding into the centre weight so the table sums to 1
        w[0] = 1.0 - 2.0 * w[1:].sum()
        return cls(PoolingKind.CUSTOM_TABLE, float(sigma), tuple(float(v) for v in w))

    @property
    def is_delta(self) -> bool:
        return self.kind is PoolingKind.KRONECKER_DELTA or (
            self.kind is PoolingKind.TWO_SIDED_GEOMETRIC and self.sigma == 0.0
        )


def load_table_json(source: str | Path) -> PoolingPmf:
    """Load a table PMF from a JSON array of ``[k, weight]`` pairs with ``k >= 0``.

    ``source`` is a path or a JSON string. Missing offsets get weight 0.
    """
    text = str(source)
    if not text.lstrip().startswith("["):
        text = Path(source).read_text()
    pairs = json.loads(text)
    if not pairs:
        raise ValueError("empty pooling table")
    size = 0
    for k, _ in pairs:
        if int(k) != k or k < 0:
            raise ValueError(f"table offsets must be nonnegative integers, got {k!r}")
        size = max(size, int(k) + 1)
    w = np.zeros(size)
    for k, weight in pairs:
        w[int(k)] += float(weight)
    return PoolingPmf.from_table(w)


def _geometric_centre(sigma: float) -> float:
    # (e^{1/s} - 1) / (e^{1/s} + 1) == tanh(1 / (2 s))
    return math.tanh(0.5 / sigma)


def pmf_value(q: PoolingPmf, k):
    """Evaluate ``q_sigma(k)``; ``k`` may be an integer or an integer array."""
    k_arr = np.abs(np.asarray(k, dtype=np.int64))
    if q.is_delta:
        out = (k_arr == 0).astype(float)
    elif q.kind is PoolingKind.TWO_SIDED_GEOMETRIC:
        out = _geometric_centre(q.sigma) * np.exp(-k_arr / q.sigma)
    else:
        table = np.asarray(q.table)
        out = np.where(k_arr < table.size, table[np.minimum(k_arr, table.size - 1)], 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def tail_mass(q: PoolingPmf, K: int) -> float:
    """Mass outside the central window, ``sum_{|k| > K} q_sigma(k)``."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    if q.is_delta:
        return 0.0
    if q.kind is PoolingKind.TWO_SIDED_GEOMETRIC:
        a = 1.0 / q.sigma
        return 2.0 * math.exp(-K * a) / (math.exp(a) + 1.0)
    table = np.asarray(q.table)
    if K + 1 >= table.size:
        return 0.0
    return float(2.0 * table[K + 1:].sum())


def truncation_radius(q: PoolingPmf, tol: float = DEFAULT_TOL) -> int:
    """Smallest ``K`` with ``tail_mass(q, K) <= tol``."""
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    if q.is_delta:
        return 0
    if q.kind is PoolingKind.TWO_SIDED_GEOMETRIC:
        a = 1.0 / q.sigma
        guess = max(0, math.ceil(q.sigma * math.log(2.0 / ((math.exp(a) + 1.0) * tol))))
        # closed-form guess, then settle rounding at the boundary
        while guess > 0 and tail_mass(q, guess - 1) <= tol:
            guess -= 1
        while tail_mass(q, guess) > tol:
            guess += 1
        return guess
    K = 0
    while tail_mass(q, K) > tol:
        K += 1
    return K


def truncated_weights(q: PoolingPmf, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Weights for offsets ``-K..K`` renormalized to unit mass."""
    K = truncation_radius(q, tol)
    w = pmf_value(q, np.arange(-K, K + 1))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    return w / math.fsum(w)


@dataclass(frozen=True)
class CesaroReport:
    sigmas: np.ndarray
    errors: np.ndarray
    largest_is_min: bool


def cesaro_check(
    a: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    sigma_grid: Sequence[float],
    horizon: int,
    family: Callable[[float], PoolingPmf] = PoolingPmf.geometric,
    tol: float = DEFAULT_TOL,
) -> CesaroReport:
    """Compare pooled weighted sums of ``a`` against its Cesaro mean ``alpha``.

    ``a`` maps an integer offset array to sequence values. For each sigma the
    sum ``sum_k q_sigma(k) a_k`` is truncated at the PMF's truncation radius
    and renormalized. Offsets ``k`` and ``-k`` are paired and the mean is
    subtracted term by term so symmetric fixtures cancel exactly.
    """
    sigmas = np.asarray(sigma_grid, dtype=float)
    if np.any(np.diff(sigmas) <= 0):
        raise ValueError("sigma_grid must be strictly increasing")
    pmfs = [family(s) for s in sigmas]
    radii = [truncation_radius(q, tol) for q in pmfs]
    if max(radii) > horizon:
        raise InsufficientHorizonError(
            f"insufficient horizon: need {max(radii)} offsets for sigma={sigmas.max():g}, "
            f"got {horizon}"
        )
    errors = np.empty(sigmas.size)
    for idx, (q, K) in enumerate(zip(pmfs, radii)):
        pos = np.arange(1, K + 1)
        w0 = pmf_value(q, 0)
        w = np.atleast_1d(pmf_value(q, pos)) if K else np.zeros(0)
        centred0 = float(np.asarray(a(np.array([0])), dtype=float)[0]) - alpha
        paired = (np.asarray(a(pos), dtype=float) - alpha) + (
            np.asarray(a(-pos), dtype=float) - alpha
        )
        num = math.fsum(np.concatenate([[w0 * centred0], w * paired]))
        den = math.fsum(np.concatenate([[w0], 2.0 * w]))
        errors[idx] = abs(num / den)
    return CesaroReport(sigmas, errors, bool(errors[-1] <= errors.min()))


def check_axioms(q: PoolingPmf, k_max: int = 10_000, tol: float = 1e-12) -> dict[str, bool]:
    """Check symmetry, monotonicity and normalization of a single PMF."""
    ks = np.arange(0, k_max + 1)
    pos = np.atleast_1d(pmf_value(q, ks))
    neg = np.atleast_1d(pmf_value(q, -ks))
    K = truncation_radius(q, tol)
    inner = math.fsum(np.atleast_1d(pmf_value(q, np.arange(-K, K + 1))))
    report = {
        "symmetry": bool(np.array_equal(pos, neg)),
        "monotonicity": bool(np.all(np.diff(pos) <= 0)),
        "normalization": abs(inner + tail_mass(q, K) - 1.0) <= 1e-10,
    }
    if q.kind is not PoolingKind.CUSTOM_TABLE:
        report["delta_at_zero_width"] = (not q.is_delta) or (pos[0] == 1.0 and not pos[1:].any())
    return report


def check_family_limits(
    sigma_grid: Sequence[float] = (0.0, 0.1, 1.0, 10.0, 100.0),
    k_range: int = 5,
    eps: float = 0.1,
    k_tail: int = 1,
) -> dict[str, bool]:
    """Sampled checks of the geometric family's limiting properties.

    * continuity at zero width: ``|q_s(k) - q_0(k)|`` shrinks as ``s`` decreases to 0
    * tail growth: ``q_s(k)`` nondecreasing on ``[0, eps]`` for ``|k| >= k_tail``
    * vanishing: for each ``k``, ``q_s(k)`` decreases along the grid points with
      ``s >= 2 max(|k|, 1)`` and the largest grid point carries little mass.
      Below ``s ~ |k|`` the weight still grows, so the whole grid is not checked.
    """
    grid = np.asarray(sigma_grid, dtype=float)
    ks = np.arange(-k_range, k_range + 1)

    def column(sigmas, offsets):
        return np.array([np.atleast_1d(pmf_value(PoolingPmf.geometric(s), offsets)) for s in sigmas])

    q0 = np.atleast_1d(pmf_value(PoolingPmf.delta(), ks))
    small = np.sort(grid[grid > 0])
    dev = np.abs(column(small, ks) - q0).max(axis=1)
    continuity = bool(np.all(np.diff(dev) >= 0)) and bool(dev[0] < 1e-4)

    fine = np.linspace(0.0, eps, 51)
    tail_growth = bool(np.all(np.diff(column(fine, np.arange(k_tail, k_tail + 50)), axis=0) >= 0))

    vanishing = bool(column([grid.max()], ks).max() < 0.01)
    for k in ks:
        sub = grid[grid >= 2 * max(abs(int(k)), 1)]
        if sub.size < 2:
            continue
        vanishing &=bool(np.all(np.diff(column(sub, [k])[:, 0]) < 0))
    return {"continuity_at_zero": continuity, "tail_growth": tail_growth, "vanishing": vanishing}
