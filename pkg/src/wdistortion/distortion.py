"""Pooled measures and Wasserstein distortion between symbol sequences.

A finite :class:`SymbolSequence` stands in for a doubly-infinite realization:
the core block ``x_{-N..N}`` is flanked by guard bands that must be at least
as wide as the pooling truncation radius.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve

from .pooling import DEFAULT_TOL, PoolingPmf, pmf_value, truncation_radius
from .transport import CostMatrix, DiscreteDistribution, w2sq_exact, w2sq_uniform, wp_p_weighted


class InsufficientGuardError(ValueError):
    """The guard bands do not cover the pooling window."""


@dataclass(frozen=True)
class SymbolSequence:
    """Core block ``x_{-N..N}`` over ``{1..A}`` with left and right guard bands."""

    core: np.ndarray
    guard_left: np.ndarray
    guard_right: np.ndarray
    A: int

    def __post_init__(self):
        for name in ("core", "guard_left", "guard_right"):
            arr = np.array(getattr(self, name), dtype=np.int64).reshape(-1)
            if arr.size and (arr.min() < 1 or arr.max() > self.A):
                raise ValueError(f"{name} has symbols outside 1..{self.A}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.core.size % 2 != 1:
            raise ValueError("core must have odd length 2N+1")
        full = np.concatenate([self.guard_left, self.core, self.guard_right])
        full.setflags(write=False)
        object.__setattr__(self, "_full", full)

    @classmethod
    def from_array(cls, symbols, guard: int, A: int) -> "SymbolSequence":
        """Split a flat array into ``guard`` symbols, the core, and ``guard`` symbols."""
        s = np.asarray(symbols, dtype=np.int64)
        if guard < 0 or s.size <= 2 * guard:
            raise ValueError("array too short for the requested guard width")
        return cls(s[guard:s.size - guard], s[:guard], s[s.size - guard:], A)

    @property
    def N(self) -> int:
        return (self.core.size - 1) // 2

    @property
    def symbols(self) -> np.ndarray:
        return self._full

    def position(self, n: int) -> int:
        """Offset of core index ``n`` in :attr:`symbols`."""
        if not -self.N <= n <= self.N:
            raise IndexError(f"index {n} outside core -{self.N}..{self.N}")
        return self.guard_left.size + self.N + n

    def guard(self) -> int:
        return min(self.guard_left.size, self.guard_right.size)


class FeatureKind(enum.Enum):
    IDENTITY = "identity"
    SLIDING_WINDOW_AVERAGE = "sliding_window_average"


@dataclass(frozen=True)
class FeatureMap:
    kind: FeatureKind = FeatureKind.IDENTITY
    width: int = 1

    def __post_init__(self):
        if self.kind is FeatureKind.SLIDING_WINDOW_AVERAGE and (self.width < 1 or self.width % 2 == 0):
            raise ValueError("sliding window width must be a positive odd integer")

    @classmethod
    def sliding_window(cls, width: int) -> "FeatureMap":
        return cls(FeatureKind.SLIDING_WINDOW_AVERAGE, width)

    @property
    def half_width(self) -> int:
        return (self.width - 1) // 2 if self.kind is FeatureKind.SLIDING_WINDOW_AVERAGE else 0

    def apply(self, symbols: np.ndarray) -> np.ndarray:
        """Features at every position with a complete window.

        The output is shorter than the input by ``2 * half_width``; element
        ``j`` is the feature at input position ``j + half_width``.
        """
        s = np.asarray(symbols, dtype=float)
        if self.kind is FeatureKind.IDENTITY:
            return s
        return np.convolve(s, np.full(self.width, 1.0 / self.width), mode="valid")


IDENTITY = FeatureMap()


@dataclass(frozen=True)
class PooledMeasure:
    """Weighted point masses; ``alphabet_size`` is set for identity features on ``{1..A}``."""

    values: np.ndarray
    weights: np.ndarray
    alphabet_size: int | None = None

    @property
    def distribution(self) -> DiscreteDistribution:
        if self.alphabet_size is None:
            raise TypeError("real-valued pooled measure has no alphabet distribution")
        return DiscreteDistribution.normalized(self.weights)


def _radius(q: PoolingPmf, tol: float, feature: FeatureMap) -> int:
    return truncation_radius(q, tol) + feature.half_width


def _check_guard(seq: SymbolSequence, q: PoolingPmf, tol: float, feature: FeatureMap) -> int:
    need = _radius(q, tol, feature)
    if seq.guard() < need:
        raise InsufficientGuardError(
            f"guard bands of width {seq.guard()} are too narrow: pooling needs radius {need}"
        )
    return truncation_radius(q, tol)


def pooled_measure(
    seq: SymbolSequence,
    n: int,
    q: PoolingPmf,
    tol: float = DEFAULT_TOL,
    feature: FeatureMap = IDENTITY,
) -> PooledMeasure:
    """Pooled feature measure at core index ``n``, truncated at ``tol`` and renormalized."""
    K = _check_guard(seq, q, tol, feature)
    pos = seq.position(n)
    w = np.atleast_1d(pmf_value(q, np.arange(-K, K + 1)))
    w = w / math.fsum(w)
    if feature.kind is FeatureKind.IDENTITY:
        window = seq.symbols[pos - K:pos + K + 1]
        mass = np.bincount(window - 1, weights=w, minlength=seq.A)
        return PooledMeasure(np.arange(1, seq.A + 1, dtype=float), mass, seq.A)
    h = feature.half_width
    z = feature.apply(seq.symbols[pos - K - h:pos + K + h + 1])
    return PooledMeasure(z, w)


def pooled_distributions(
    seq: SymbolSequence, q: PoolingPmf, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Pooled symbol distributions for every core index, shape ``(2N+1, A)``.

    Same quantity as :func:`pooled_measure` with identity features, computed
    for the whole block by convolving symbol indicators with the kernel.
    """
    K = _check_guard(seq, q, tol, IDENTITY)
    w = np.atleast_1d(pmf_value(q, np.arange(-K, K + 1)))
    w = w / math.fsum(w)
    start = seq.position(-seq.N)
    seg = seq.symbols[start - K:start + seq.core.size + K]
    out = np.empty((seq.core.size, seq.A))
    for i in range(seq.A):
        out[:, i] = convolve((seg == i + 1).astype(float), w, mode="valid")
    # FFT round-off can leave tiny negative masses
    return np.clip(out, 0.0, None)


def _check_pair(x: SymbolSequence, xhat: SymbolSequence):
    if x.A != xhat.A or x.N != xhat.N:
        raise ValueError("sequences must share alphabet size and core length")


def distortion_at(
    x: SymbolSequence,
    xhat: SymbolSequence,
    n: int,
    q: PoolingPmf,
    d: CostMatrix | None = None,
    tol: float = DEFAULT_TOL,
    feature: FeatureMap = IDENTITY,
    p: float = 2.0,
) -> float:
    """Distortion at index ``n``: ``W^2_2`` between the two pooled measures.

    With identity features the cost matrix ``d`` over the alphabet is used
    (closed form when it is uniform). With sliding-window features the
    features are real numbers and ``W_p^p`` under ``|u - v|`` is returned;
    ``d`` is ignored.
    """
    _check_pair(x, xhat)
    y, yhat = pooled_measure(x, n, q, tol, feature), pooled_measure(xhat, n, q, tol, feature)
    if feature.kind is FeatureKind.IDENTITY:
        if d is None:
            raise ValueError("identity features need a cost matrix")
        if d.is_uniform:
            return w2sq_uniform(y.weights, yhat.weights, d.d_max)
        return w2sq_exact(y.distribution, yhat.distribution, d)[0]
    return wp_p_weighted(y.values, y.weights, yhat.values, yhat.weights, p)


def distortion_profile(
    x: SymbolSequence,
    xhat: SymbolSequence,
    q: PoolingPmf,
    d: CostMatrix | None = None,
    tol: float = DEFAULT_TOL,
    feature: FeatureMap = IDENTITY,
    p: float = 2.0,
) -> np.ndarray:
    """Per-index distortion ``D_n`` for ``n = -N..N``."""
    _check_pair(x, xhat)
    if feature.kind is FeatureKind.IDENTITY:
        if d is None:
            raise ValueError("identity features need a cost matrix")
        y, yhat = pooled_distributions(x, q, tol), pooled_distributions(xhat, q, tol)
        if d.is_uniform:
            return 0.5 * d.d_max**2 * np.abs(y - yhat).sum(axis=1)
        return np.array([
            w2sq_exact(DiscreteDistribution.normalized(a), DiscreteDistribution.normalized(b), d)[0]
            for a, b in zip(y, yhat)
        ])
    return np.array([
        distortion_at(x, xhat, n, q, d, tol, feature, p) for n in range(-x.N, x.N + 1)
    ])


def block_distortion(
    x: SymbolSequence,
    xhat: SymbolSequence,
    q: PoolingPmf,
    d: CostMatrix | None = None,
    tol: float = DEFAULT_TOL,
    feature: FeatureMap = IDENTITY,
    p: float = 2.0,
) -> float:
    """Spatial average of ``D_n`` over the core block."""
    prof = distortion_profile(x, xhat, q, d, tol, feature, p)
    return math.fsum(prof) / prof.size
