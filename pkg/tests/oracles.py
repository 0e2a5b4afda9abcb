"""Independent reference implementations used only by the tests.

These deliberately avoid the package's own code paths: plain loops,
direct summation and exhaustive enumeration.
"""

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def geometric_direct(sigma, k):
    e = math.exp(1.0 / sigma)
    return (e - 1.0) / (e + 1.0) * math.exp(-abs(k) / sigma)


def tail_direct(sigma, K, k_max):
    return sum(2.0 * geometric_direct(sigma, k) for k in range(K + 1, k_max + 1))


def radius_scan(sigma, tol):
    K = 0
    while 1.0 - sum(geometric_direct(sigma, k) for k in range(-K, K + 1)) > tol:
        K += 1
    return K


def vertex_w2sq(mu, nu, cost):
    """Minimum of the squared-cost transport LP by enumerating basic feasible solutions."""
    mu, nu, c = np.asarray(mu, float), np.asarray(nu, float), np.asarray(cost, float) ** 2
    A = mu.size
    cells = [(i, j) for i in range(A) for j in range(A)]
    M = np.zeros((2 * A, A * A))
    for col, (i, j) in enumerate(cells):
        M[i, col] = 1.0
        M[A + j, col] = 1.0
    rhs = np.concatenate([mu, nu])
    best = math.inf
    for basis in itertools.combinations(range(A * A), 2 * A - 1):
        sub = M[:, basis]
        if np.linalg.matrix_rank(sub) < 2 * A - 1:
            continue
        sol, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.max(np.abs(sub @ sol - rhs)) > 1e-12 or sol.min() < -1e-12:
            continue
        best = min(best, sum(c[cells[b]] * v for b, v in zip(basis, sol)))
    return best


def grid_w2sq_a3(mu, nu, cost, step):
    """Grid search over the four free cells of a 3x3 coupling."""
    c = np.asarray(cost, float) ** 2
    g = np.arange(0.0, 1.0 + step / 2, step)
    p11, p12, p21, p22 = np.meshgrid(g, g, g, g, indexing="ij", sparse=True)
    p13 = mu[0] - p11 - p12
    p23 = mu[1] - p21 - p22
    p31 = nu[0] - p11 - p21
    p32 = nu[1] - p12 - p22
    p33 = nu[2] - p13 - p23
    plan = [p11, p12, p13, p21, p22, p23, p31, p32, p33]
    ok = np.ones(np.broadcast(*plan).shape, dtype=bool)
    for v in plan:
        ok &= v >= -1e-12
    total = sum(c[i // 3, i % 3] * v for i, v in enumerate(plan))
    return float(np.min(np.where(ok, total, np.inf)))


def lp_wp(x, wx, y, wy, p):
    """W_p^p between weighted point masses on the line, as a generic LP."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    wx, wy = np.asarray(wx, float) / np.sum(wx), np.asarray(wy, float) / np.sum(wy)
    m, n = x.size, y.size
    cost = np.abs(x[:, None] - y[None, :]) ** p
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n:(i + 1) * n] = 1
    for j in range(n):
        A_eq[m + j, j::n] = 1
    res = linprog(cost.ravel(), A_eq=A_eq, b_eq=np.concatenate([wx, wy]), bounds=(0, None),
                  method="highs-ds", options={"primal_feasibility_tolerance": 1e-10,
                                              "dual_feasibility_tolerance": 1e-10})
    return res.fun


def brute_block_distortion(x_full, xh_full, guard, sigma, cost, tol=1e-10):
    """Mean over the core of W_2^2 between pooled distributions, by plain loops."""
    A = len(cost)
    K = radius_scan(sigma, tol)
    assert K <= guard
    core = len(x_full) - 2 * guard
    vals = []
    for n in range(guard, guard + core):
        y, yh = [0.0] * A, [0.0] * A
        for k in range(-K, K + 1):
            w = geometric_direct(sigma, k)
            y[x_full[n + k] - 1] += w
            yh[xh_full[n + k] - 1] += w
        s = sum(y)
        vals.append(vertex_w2sq([v / s for v in y], [v / s for v in yh], cost))
    return sum(vals) / len(vals)


def independent_bound_direct(sigma, pmf, d_max, k_max=None):
    """Standard-deviation form: sqrt(sum_k q(k)^2) times the per-symbol spreads."""
    k_max = k_max or int(60 * sigma) + 10
    sq = sum(geometric_direct(sigma, k) ** 2 for k in range(-k_max, k_max + 1))
    return math.sqrt(sq) * d_max**2 / 2 * sum(math.sqrt(2 * p * (1 - p)) for p in pmf)


def permutation_bound_direct(sigma, k, d_max, A):
    e = math.exp
    pre = (e(1 / sigma) - 1) / (e(1 / sigma) + 1)
    inner = ((1 + e(2 * (k - 1) / sigma)) / (e(2 * k / sigma) - 1) + 2) * k**3 / sigma**2 * (
        1 - k / sigma + k**2 / sigma**2
    )
    return pre * math.sqrt(inner) * d_max**2 / 2 * A
