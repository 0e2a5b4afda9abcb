"""Monte Carlo sweeps over the pooling width and the limit experiments.

Every trial draws its randomness from ``SeedSequence([master_seed, i, t])``
(sigma index ``i``, trial ``t``), so results do not depend on how trials are
scheduled across workers.
"""

from __future__ import annotations

import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .coding import (
    PermutationSchemeConfig,
    RateRegion,
    SourceSpec,
    bound_independent,
    bound_permutation,
    classify_rate_region,
    independent_realization,
    permutation_decode,
    permutation_encode,
    permutation_rate,
    sample_source,
)
from .distortion import SymbolSequence, block_distortion
from .pooling import DEFAULT_TOL, InsufficientHorizonError, PoolingPmf, pmf_value, tail_mass, truncation_radius
from .transport import CostMatrix, w2sq_exact, w2sq_uniform, wp_p_weighted

CSV_COLUMNS = ("sigma", "k", "rate", "mean_distortion", "std_error", "bound", "trials", "N", "seed")
MIN_COVERAGE = 0.99
_HAT_STREAM = 0x4A7


class Scheme(enum.Enum):
    INDEPENDENT = "independent"
    PERMUTATION = "permutation"


class RegionAssertionError(AssertionError):
    """A measured exponent pair fell in the provably unachievable region."""


@dataclass(frozen=True)
class NPolicy:
    """Block-length rule: at least ``min_windows`` full windows and ``sigma_multiple * sigma`` symbols.

    Among admissible odd lengths the smallest one with the fewest remainder
    positions is taken (zero when ``k`` is odd, otherwise one unless the
    offset is odd).
    """

    min_windows: int = 64
    sigma_multiple: float = 16.0

    def block_length(self, k: int, sigma: float, C: int = 0) -> int:
        L = max(self.min_windows * k + C, math.ceil(self.sigma_multiple * sigma), 1)
        L += 1 - L % 2
        best = 0 if (k % 2 == 1 or C % 2 == 1) else 1
        while (L - C) % k != best:
            L += 2
        return L


def coverage(k: int, block_length: int, C: int = 0) -> float:
    return k * PermutationSchemeConfig(k, C).window_count(block_length) / block_length


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    k: int
    rate: float
    mean_distortion: float
    std_error: float
    bound: float
    trials: int
    N: int
    seed: int


@dataclass
class SweepResult:
    scheme: Scheme
    rows: list[SweepRow]
    config: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            vals = asdict(row)
            buf.write(",".join(_fmt(vals[c]) for c in CSV_COLUMNS) + "\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _trial(task) -> float:
    scheme, pmf, cost, sigma, k, C, L, tol, seed_entropy = task
    spec, d = SourceSpec(pmf), CostMatrix(cost)
    q = PoolingPmf.geometric(sigma)
    K = truncation_radius(q, tol)
    B = math.ceil(K / L)
    rng = np.random.default_rng(np.random.SeedSequence(seed_entropy))
    x = sample_source(spec, (2 * B + 1) * L, rng)
    if scheme is Scheme.INDEPENDENT:
        xhat = independent_realization(spec, x, rng)
    else:
        # the same block code is applied to the centre block and every guard block
        cfg = PermutationSchemeConfig(k, C)
        xhat = np.concatenate([
            permutation_decode(permutation_encode(x[b * L:(b + 1) * L], cfg, spec.A), cfg, rng)
            for b in range(2 * B + 1)
        ])
    lo, hi = B * L - K, (B + 1) * L + K
    X = SymbolSequence.from_array(x[lo:hi], K, spec.A)
    Xh = SymbolSequence.from_array(xhat[lo:hi], K, spec.A)
    return block_distortion(X, Xh, q, d, tol)


def _map(tasks, workers: int) -> list[float]:
    if workers <= 1:
        return [_trial(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def run_sweep(
    scheme: Scheme | str,
    spec: SourceSpec,
    d: CostMatrix,
    sigma_grid: Sequence[float],
    gamma: float = 0.5,
    trials: int = 200,
    master_seed: int = 0,
    N: int | None = None,
    n_policy: NPolicy = NPolicy(),
    tol: float = DEFAULT_TOL,
    workers: int = 1,
    C: int = 0,
    k: int | None = None,
) -> SweepResult:
    """Estimate expected block distortion of a scheme at each pooling width.

    For the permutation scheme the window size is ``round(sigma ** gamma)``
    unless ``k`` pins it. ``N`` fixes the half block length; otherwise
    ``n_policy`` picks it per sigma. Guard blocks on both sides are coded
    with the same block code and only the centre block is measured.
    """
    scheme = Scheme(scheme)
    if trials < 2:
        raise ValueError("need at least 2 trials for a standard error")
    plan = []
    for s in sigma_grid:
        if scheme is Scheme.PERMUTATION:
            kk = k if k is not None else PermutationSchemeConfig.from_sigma(s, gamma).k
            cc = min(C, kk - 1)
        else:
            kk, cc = 0, 0
        L = 2 * N + 1 if N is not None else n_policy.block_length(max(kk, 1), s, cc)
        if scheme is Scheme.PERMUTATION and coverage(kk, L, cc) < MIN_COVERAGE:
            raise ValueError(
                f"infeasible block: N={(L - 1) // 2} with k={kk} covers only {coverage(kk, L, cc):.4f} "
                f"of the block (need {MIN_COVERAGE})"
            )
        plan.append((float(s), kk, cc, L))

    pmf, cost = spec.pmf.tolist(), d.entries.tolist()
    rows = []
    for i, (s, kk, cc, L) in enumerate(plan):
        tasks = [(scheme, pmf, cost, s, kk, cc, L, tol, (master_seed, i, t)) for t in range(trials)]
        vals = np.array(_map(tasks, workers))
        if scheme is Scheme.PERMUTATION:
            rate = permutation_rate(spec.A, kk, L, cc)
            bound = bound_permutation(s, kk, d.d_max, spec.A)
        else:
            rate, bound = 0.0, bound_independent(s, spec, d.d_max)
        mean = math.fsum(vals) / trials
        std_error = float(np.std(vals, ddof=1)) / math.sqrt(trials)
        rows.append(SweepRow(s, kk, rate, mean, std_error, bound, trials, (L - 1) // 2, master_seed))
    config = {
        "scheme": scheme.value,
        "A": spec.A,
        "pmf": pmf,
        "cost": cost,
        "sigma_grid": [float(s) for s in sigma_grid],
        "gamma": gamma,
        "trials": trials,
        "seed": master_seed,
        "N": N,
        "N_policy": asdict(n_policy),
        "tol": tol,
        "C": C,
        "k": k,
    }
    return SweepResult(scheme, rows, config)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r_squared: float
    grid: tuple[float, ...]


def fit_power_law(x, y, labels=None) -> ExponentFit:
    """Ordinary least squares of ``log10 y`` on ``log10 x``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 4:
        raise ValueError("need at least 4 points for an exponent fit")
    for i, (xi, yi) in enumerate(zip(x, y)):
        if not (xi > 0 and yi > 0):
            tag = labels[i] if labels is not None else f"row {i}"
            raise ValueError(f"nonpositive value in {tag}: x={xi!r}, y={yi!r}")
    lx, ly = np.log10(x), np.log10(y)
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot))
    return ExponentFit(float(res.slope), float(res.intercept), r2, tuple(x.tolist()))


def fit_exponent(result: SweepResult, column: str = "distortion") -> ExponentFit:
    """Log-log slope of mean distortion or rate against sigma."""
    name = {"distortion": "mean_distortion", "rate": "rate"}[column]
    sig = result.column("sigma")
    return fit_power_law(sig, result.column(name), [f"sigma={s:g}" for s in sig])


@dataclass(frozen=True)
class LimitTable:
    sigmas: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    target: float

    def tail_decreasing(self, m: int = 4) -> bool:
        """Errors over the last ``m`` grid points decrease (ties allowed only at zero)."""
        tail = self.errors[-m:]
        return bool(all(b < a or (a == 0 and b == 0) for a, b in zip(tail, tail[1:])))

    @property
    def largest_is_min(self) -> bool:
        big = int(np.argmax(self.sigmas))
        return bool(self.errors[big] <= self.errors.min())


def fidelity_limit_experiment(
    z, zhat, sigma_grid: Sequence[float], p: float = 2.0, tol: float = DEFAULT_TOL
) -> LimitTable:
    """``D_{0,sigma}`` for real feature sequences centred on their middle element.

    The error column is ``|D_{0,sigma} - |z_0 - zhat_0|^p|``.
    """
    z, zhat = np.asarray(z, dtype=float), np.asarray(zhat, dtype=float)
    if z.shape != zhat.shape or z.ndim != 1 or z.size % 2 != 1:
        raise ValueError("z and zhat must be 1-D of the same odd length")
    M = z.size // 2
    target = float(np.abs(z[M] - zhat[M]) ** p)
    sig = np.asarray(sigma_grid, dtype=float)
    values = np.empty(sig.size)
    for i, s in enumerate(sig):
        q = PoolingPmf.geometric(s)
        K = truncation_radius(q, tol)
        if K > M:
            raise InsufficientHorizonError(f"sigma={s:g} needs {K} neighbours, sequences give {M}")
        w = np.atleast_1d(pmf_value(q, np.arange(-K, K + 1)))
        values[i] = wp_p_weighted(z[M - K:M + K + 1], w, zhat[M - K:M + K + 1], w, p)
    return LimitTable(sig, values, np.abs(values - target), target)


def _w2sq(a: np.ndarray, b: np.ndarray, d: CostMatrix) -> float:
    if d.is_uniform:
        return w2sq_uniform(a, b, d.d_max)
    return w2sq_exact(a / a.sum(), b / b.sum(), d)[0]


def realism_limit_experiment(
    spec: SourceSpec,
    spec_hat: SourceSpec,
    sigma_grid: Sequence[float],
    d: CostMatrix,
    seed: int,
    seed_hat: int | None = None,
    tol: float = DEFAULT_TOL,
    horizon: int | None = None,
) -> LimitTable:
    """``D_{0,sigma}`` for one long i.i.d. realization of each source.

    The target is the optimal transport cost between the two source laws.
    Passing ``seed_hat == seed`` with equal specs makes the realizations
    identical.
    """
    if spec.A != spec_hat.A or d.size != spec.A:
        raise ValueError("sources and cost must share the alphabet")
    sig = np.asarray(sigma_grid, dtype=float)
    radii = [truncation_radius(PoolingPmf.geometric(s), tol) for s in sig]
    H = max(radii) if horizon is None else horizon
    if H < max(radii):
        raise InsufficientHorizonError(f"horizon {H} is below the truncation radius {max(radii)}")
    hat_seed = np.random.SeedSequence([_HAT_STREAM, seed]) if seed_hat is None else seed_hat
    x = sample_source(spec, 2 * H + 1, seed)
    xh = sample_source(spec_hat, 2 * H + 1, hat_seed)
    values = np.empty(sig.size)
    for i, (s, K) in enumerate(zip(sig, radii)):
        q = PoolingPmf.geometric(s)
        # closed-form truncated mass avoids a compensated sum over millions of weights
        w = np.atleast_1d(pmf_value(q, np.arange(-K, K + 1))) / (1.0 - tail_mass(q, K))
        y = np.bincount(x[H - K:H + K + 1] - 1, weights=w, minlength=spec.A)
        yh = np.bincount(xh[H - K:H + K + 1] - 1, weights=w, minlength=spec.A)
        values[i] = _w2sq(y, yh, d)
    target = _w2sq(spec.pmf.copy(), spec_hat.pmf.copy(), d)
    return LimitTable(sig, values, np.abs(values - target), target)


@dataclass(frozen=True)
class RegionPoint:
    name: str
    alpha: float
    beta: float


@dataclass
class RegionReport:
    rows: list[dict]
    boundary: dict
    failures: list[str]

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and math.isinf(v) else v

        rows = [{k: clean(v) for k, v in r.items()} for r in self.rows]
        return {"rows": rows, "boundary": self.boundary, "failures": self.failures}


def scheme_point(result: SweepResult, name: str | None = None) -> RegionPoint:
    """Measured ``(alpha, beta)`` for a sweep; zero-rate schemes get ``alpha = -inf``."""
    beta = fit_exponent(result, "distortion").slope
    if result.scheme is Scheme.INDEPENDENT or np.all(result.column("rate") == 0):
        alpha = -math.inf
    else:
        alpha = fit_exponent(result, "rate").slope
    return RegionPoint(name or result.scheme.value, alpha, beta)


def region_boundary() -> dict:
    """Polylines of the known region edges for plotting (``beta`` clipped at -4)."""
    return {
        "achievable": [[-4.0, -0.5], [-1.0, -0.5], [0.0, -1.5], [0.0, -4.0]],
        "not_achievable": [[-4.0, -0.5], [-2.0, -0.5]],
    }


def region_report(
    measured: Sequence[RegionPoint],
    synthetic: Sequence[RegionPoint] = (),
    tol: float = 0.1,
    strict: bool = True,
) -> RegionReport:
    """Classify measured and synthetic exponent pairs.

    Measured pairs are classified with ``tol`` of fitting slack; any of them
    landing in the unachievable region is a failure and raises
    :class:`RegionAssertionError` when ``strict``.
    """
    rows, failures = [], []
    for kind, points, slack in (("measured", measured, tol), ("synthetic", synthetic, 0.0)):
        for pt in points:
            cls = classify_rate_region(pt.alpha, pt.beta, slack)
            rows.append({"name": pt.name, "kind": kind, "alpha": pt.alpha, "beta": pt.beta,
                         "classification": cls.value})
            if kind == "measured" and cls is RateRegion.NOT_ACHIEVABLE:
                failures.append(f"{pt.name}: ({pt.alpha}, {pt.beta}) is not achievable")
    report = RegionReport(rows, region_boundary(), failures)
    if strict and failures:
        raise RegionAssertionError("; ".join(failures))
    return report
