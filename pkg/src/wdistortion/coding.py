"""Low-rate codes for i.i.d. finite-alphabet sources and their analytic bounds.

Two schemes are provided. The independent-realization scheme sends nothing
and lets the decoder draw a fresh i.i.d. sequence. The windowed
random-permutation scheme sends the symbol counts of each length-``k``
window and the decoder emits a uniformly random arrangement of them.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"WDPM"
HEADER = struct.Struct(">4sHHII")  # magic, A, reserved, k, window_count
# stream tag separating the independent decoder's draws from the source's
_INDEPENDENT_STREAM = 0x1D


class MalformedMessageError(ValueError):
    """Encoded counts are inconsistent with the window configuration."""


@dataclass(frozen=True)
class SourceSpec:
    pmf: np.ndarray

    def __post_init__(self):
        p = np.array(self.pmf, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("source needs an alphabet of at least 2 symbols")
        if np.any(p < 0) or abs(math.fsum(p) - 1.0) > 1e-12:
            raise ValueError("pmf must be a probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)

    @property
    def A(self) -> int:
        return self.pmf.size

    @property
    def min_variance(self) -> float:
        """``min_i p_i (1 - p_i)``."""
        return float(np.min(self.pmf * (1.0 - self.pmf)))


@dataclass(frozen=True)
class PermutationSchemeConfig:
    """Window size ``k``, offset ``C`` of the first window inside a block."""

    k: int
    C: int = 0
    gamma: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("window size k must be >= 1")
        if not 0 <= self.C <= self.k - 1:
            raise ValueError("offset C must lie in [0, k-1]")
        if self.gamma is not None and not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")

    @classmethod
    def from_sigma(cls, sigma: float, gamma: float, C: int = 0) -> "PermutationSchemeConfig":
        """Window size tied to the pooling width: ``k = round(sigma ** gamma)``."""
        k = max(1, math.floor(sigma**gamma + 0.5))
        return cls(k, min(C, k - 1), gamma)

    def window_count(self, block_length: int) -> int:
        return max(0, (block_length - self.C) // self.k)


def field_width(k: int) -> int:
    """Bits per transmitted count, ``ceil(log2(k + 1))``."""
    return int(k).bit_length()


def permutation_rate(A: int, k: int, block_length: int, C: int = 0) -> float:
    """Exact rate in bits per symbol of the permutation scheme on one block."""
    windows = PermutationSchemeConfig(k, C).window_count(block_length)
    return (A - 1) * field_width(k) * windows / block_length


@dataclass(frozen=True)
class EncodedMessage:
    """Per-window counts of symbols ``1..A-1``, shape ``(windows, A-1)``."""

    A: int
    k: int
    counts: np.ndarray
    block_length: int | None = None
    C: int = 0

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64).reshape(-1, self.A - 1)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def window_count(self) -> int:
        return self.counts.shape[0]

    @property
    def bit_length(self) -> int:
        return (self.A - 1) * field_width(self.k) * self.window_count

    def validate(self):
        c = self.counts
        if c.size and (c.min() < 0 or c.max() > self.k or c.sum(axis=1).max() > self.k):
            raise MalformedMessageError(f"window counts must be in [0, {self.k}] and sum to at most {self.k}")

    def to_bytes(self) -> bytes:
        """Big-endian header followed by MSB-first packed fixed-width counts."""
        b = field_width(self.k)
        vals = self.counts.ravel().astype(np.uint64)
        shifts = np.arange(b - 1, -1, -1, dtype=np.uint64)
        bits = ((vals[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
        header = HEADER.pack(MAGIC, self.A, 0, self.k, self.window_count)
        return header + np.packbits(bits.ravel()).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, block_length: int | None = None, C: int = 0) -> "EncodedMessage":
        if len(data) < HEADER.size:
            raise MalformedMessageError("message shorter than header")
        magic, A, _, k, windows = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise MalformedMessageError(f"bad magic {magic!r}")
        if A < 2 or k < 1:
            raise MalformedMessageError("header has invalid A or k")
        b = field_width(k)
        nbits = (A - 1) * b * windows
        payload = data[HEADER.size:]
        if len(payload) != (nbits + 7) // 8:
            raise MalformedMessageError(f"payload has {len(payload)} bytes, expected {(nbits + 7) // 8}")
        bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:nbits]
        weights = 1 << np.arange(b - 1, -1, -1, dtype=np.int64)
        vals = bits.reshape(-1, b).astype(np.int64) @ weights if nbits else np.zeros(0, dtype=np.int64)
        msg = cls(A, k, vals.reshape(windows, A - 1), block_length, C)
        msg.validate()
        return msg


def sample_source(spec: SourceSpec, length: int, seed) -> np.ndarray:
    """Draw ``length`` i.i.d. symbols in ``1..A``; ``seed`` may be an int or a Generator."""
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.choice(spec.A, size=length, p=spec.pmf) + 1


def independent_realization(spec: SourceSpec, x, seed) -> np.ndarray:
    """Zero-rate reconstruction: a fresh i.i.d. draw of the same length as ``x``.

    An integer ``seed`` is mixed with a fixed stream tag so the draw never
    coincides with ``sample_source`` called on the same seed.
    """
    if isinstance(seed, (int, np.integer)):
        seed = np.random.SeedSequence([_INDEPENDENT_STREAM, int(seed)])
    return sample_source(spec, np.asarray(x).size, seed)


def permutation_encode(x, cfg: PermutationSchemeConfig, A: int) -> EncodedMessage:
    """Counts of symbols ``1..A-1`` in each full window of the block ``x``.

    Positions before ``C`` and after the last full window form the window
    of remainders and are not transmitted.
    """
    x = np.asarray(x, dtype=np.int64)
    L = x.size
    W = cfg.window_count(L)
    body = x[cfg.C:cfg.C + W * cfg.k].reshape(W, cfg.k)
    counts = np.stack([(body == s).sum(axis=1) for s in range(1, A)], axis=1) if W else np.zeros((0, A - 1))
    return EncodedMessage(A, cfg.k, counts, L, cfg.C)


def permutation_decode(msg: EncodedMessage, cfg: PermutationSchemeConfig, seed) -> np.ndarray:
    """Uniformly random arrangement of each window's counts.

    Symbol ``A`` fills what the counts leave; remainder positions are set to
    the constant symbol 1.
    """
    if msg.k != cfg.k:
        raise MalformedMessageError(f"message window size {msg.k} does not match config {cfg.k}")
    msg.validate()
    W, k = msg.window_count, cfg.k
    L = msg.block_length if msg.block_length is not None else cfg.C + W * k
    if cfg.window_count(L) != W:
        raise MalformedMessageError(f"{W} windows do not fit a block of length {L} with offset {cfg.C}")
    out = np.ones(L, dtype=np.int64)
    if W == 0:
        return out
    cum = np.cumsum(msg.counts, axis=1)
    j = np.arange(k)
    # sorted arrangement: symbol s+1 occupies [cum[s-1], cum[s])
    sorted_windows = 1 + (j[None, None, :] >= cum[:, :, None]).sum(axis=1)
    rng = np.random.default_rng(seed)
    out[cfg.C:cfg.C + W * k] = rng.permuted(sorted_windows, axis=1).ravel()
    return out


def bound_independent(sigma: float, spec: SourceSpec, d_max: float) -> float:
    """Upper bound on expected distortion of the independent-realization scheme."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a = 1.0 / sigma
    spread = math.sqrt(math.expm1(4 * a) / (math.exp(a) + 1.0) ** 4)
    return spread * 0.5 * d_max**2 * math.fsum(np.sqrt(2 * spec.pmf * (1 - spec.pmf)))


def bound_permutation(sigma: float, k: int, d_max: float, A: int) -> float:
    """Upper bound on expected distortion of the permutation scheme, block length to infinity.

    Includes the ``(d_max^2 / 2) * A`` factor from summing the per-symbol
    bounds over the alphabet.
    """
    if sigma <= 0 or k < 1:
        raise ValueError("need sigma > 0 and k >= 1")
    a = 1.0 / sigma
    edge = (1.0 + math.exp(2 * (k - 1) * a)) / math.expm1(2 * k * a)
    spread = k**3 * a**2 * (1.0 - k * a + (k * a) ** 2)
    return math.tanh(0.5 * a) * math.sqrt((edge + 2.0) * spread) * 0.5 * d_max**2 * A


def converse_leading_term(sigma: float, k: int, min_variance: float) -> float:
    """Standard deviation scale of the in-window pooled sum, without the CLT constant."""
    a = 1.0 / sigma
    inner = min_variance * math.expm1(a) * math.exp(2 * a) * -math.expm1(-2 * k * a) / (math.exp(a) + 1.0) ** 3
    return math.sqrt(inner)


def converse_lower_bound(
    sigma: float,
    k: int,
    eta: float,
    epsilon: float,
    c: float,
    spec: SourceSpec,
    d_min: float,
) -> float:
    """Lower bound on expected distortion for rates below ``sigma^-(2 + epsilon)``.

    ``c`` is the caller's central-limit constant, which is not computable in
    closed form; the returned value is only meaningful up to it. The
    fraction of low-information windows is taken as 1. The result may be
    negative, in which case the bound is vacuous.
    """
    if sigma <= 0 or k < 1 or c < 0:
        raise ValueError("need sigma > 0, k >= 1, c >= 0")
    kept = max(0, math.floor(k * (1.0 - 2.0 / sigma ** (eta / 2))))
    a = 1.0 / sigma
    dependence = math.sqrt(2.0 / sigma ** (1 + (epsilon - eta) / 2))
    leakage = math.exp(-(sigma ** (eta / 2))) * 2 * math.exp(a) / (math.exp(a) + 1.0)
    per_symbol = c * converse_leading_term(sigma, k, spec.min_variance) - dependence - leakage
    return kept / k * 0.5 * d_min**2 * spec.A * per_symbol


class RateRegion(enum.Enum):
    ACHIEVABLE = "achievable"
    NOT_ACHIEVABLE = "not_achievable"
    UNRESOLVED = "unresolved"


def classify_rate_region(alpha: float, beta: float, tol: float = 0.0) -> RateRegion:
    """Place a convergence-rate pair ``(alpha, beta)`` relative to the known bounds.

    ``alpha`` and ``beta`` may be ``-inf``. ``tol`` widens the achievable
    inequalities on the distortion side to absorb fitting error in measured
    exponents.
    """
    if alpha < -2 and beta == -0.5:
        return RateRegion.NOT_ACHIEVABLE
    if alpha >= 0:
        # exact transmission (k = 1) reaches zero distortion at alpha = 0
        return RateRegion.ACHIEVABLE
    if beta > -0.5 - tol:
        return RateRegion.ACHIEVABLE
    if -1 < alpha < 0 and alpha + beta > -1.5 - tol:
        return RateRegion.ACHIEVABLE
    return RateRegion.UNRESOLVED
