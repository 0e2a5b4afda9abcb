import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import geometric_direct, radius_scan, tail_direct
from wdistortion.pooling import (
    InsufficientHorizonError,
    PoolingKind,
    PoolingPmf,
    cesaro_check,
    check_axioms,
    check_family_limits,
    load_table_json,
    pmf_value,
    tail_mass,
    truncation_radius,
)

sigmas = st.floats(min_value=0.05, max_value=500.0, allow_nan=False)


def test_delta_values():
    q = PoolingPmf.delta()
    assert pmf_value(q, 0) == 1.0
    assert pmf_value(q, 3) == 0.0
    assert tail_mass(q, 0) == 0.0
    assert truncation_radius(q, 1e-9) == 0


def test_zero_width_geometric_is_delta():
    q = PoolingPmf.geometric(0.0)
    assert q.is_delta
    assert pmf_value(q, 0) == 1.0 and pmf_value(q, -1) == 0.0


def test_geometric_centre_value():
    q = PoolingPmf.geometric(1.0)
    assert pmf_value(q, 0) == pytest.approx(0.4621171573, abs=1e-10)
    assert pmf_value(q, 0) == pytest.approx(geometric_direct(1.0, 0), rel=1e-14)
    total = math.fsum(geometric_direct(1.0, k) for k in range(-200, 201))
    assert abs(total - 1.0) < 1e-12


def test_tail_mass_examples():
    q1 = PoolingPmf.geometric(1.0)
    assert tail_mass(q1, 0) == pytest.approx(0.5378828427, abs=1e-10)
    assert tail_mass(q1, 0) == pytest.approx(tail_direct(1.0, 0, 200), abs=1e-12)
    q2 = PoolingPmf.geometric(2.0)
    assert abs(tail_mass(q2, 10) - tail_direct(2.0, 10, 400)) < 1e-12


def test_truncation_radius_examples():
    q = PoolingPmf.geometric(1.0)
    assert tail_mass(q, 0) > 0.5 >= tail_mass(q, 1)
    assert truncation_radius(q, 0.5) == 1 == radius_scan(1.0, 0.5)
    for s in (0.5, 2.0, 7.3):
        assert truncation_radius(PoolingPmf.geometric(s), 1e-6) == radius_scan(s, 1e-6)


@given(sigmas, st.floats(1e-12, 0.5), st.floats(1e-12, 0.5))
def test_truncation_radius_monotone_in_tol(s, t1, t2):
    q = PoolingPmf.geometric(s)
    lo, hi = sorted((t1, t2))
    assert truncation_radius(q, lo) >= truncation_radius(q, hi)
    K = truncation_radius(q, lo)
    assert tail_mass(q, K) <= lo
    assert K == 0 or tail_mass(q, K - 1) > lo


@settings(max_examples=30)
@given(sigmas)
def test_symmetry_and_monotonicity(s):
    q = PoolingPmf.geometric(s)
    ks = np.arange(0, 10_001)
    pos, neg = pmf_value(q, ks), pmf_value(q, -ks)
    assert np.array_equal(pos, neg)
    assert np.all(np.diff(pos) <= 0)


@given(sigmas)
def test_normalization(s):
    q = PoolingPmf.geometric(s)
    K = truncation_radius(q, 1e-12)
    inner = math.fsum(pmf_value(q, np.arange(-K, K + 1)))
    assert abs(inner + tail_mass(q, K) - 1.0) <= 1e-10


@pytest.mark.parametrize("s", [0.0, 0.1, 1.0, 10.0, 100.0])
def test_axioms_default_grid(s):
    assert all(check_axioms(PoolingPmf.geometric(s)).values())


def test_family_limits():
    assert check_family_limits() == {"continuity_at_zero": True, "tail_growth": True, "vanishing": True}


def test_family_limits_detects_small_grid_without_vanishing():
    # the largest grid point is too small to make the weights negligible
    assert not check_family_limits((0.0, 0.1, 0.5))["vanishing"]


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        PoolingPmf.geometric(-1.0)
    with pytest.raises(ValueError):
        PoolingPmf.geometric(math.inf)


def test_table_pmf():
    q = PoolingPmf.from_table([0.5, 0.25])
    assert q.kind is PoolingKind.CUSTOM_TABLE
    assert pmf_value(q, -1) == 0.25 and pmf_value(q, 2) == 0.0
    assert tail_mass(q, 0) == 0.5 and truncation_radius(q, 1e-9) == 1
    assert all(check_axioms(q).values())


def test_table_renormalization_warns():
    with pytest.warns(UserWarning, match="renormalized"):
        q = PoolingPmf.from_table([1.0, 0.5])
    assert pmf_value(q, 0) == pytest.approx(0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PoolingPmf.from_table([0.5, 0.25 + 1e-12])


def test_table_rejects_non_monotone():
    with pytest.raises(ValueError, match="monotonicity"):
        PoolingPmf(PoolingKind.CUSTOM_TABLE, table=(0.2, 0.4))


def test_load_table_json(tmp_path):
    q = load_table_json("[[0, 0.5], [1, 0.25]]")
    assert q.table == (0.5, 0.25)
    p = tmp_path / "t.json"
    p.write_text("[[0, 0.6], [2, 0.1], [1, 0.1]]")
    assert load_table_json(p).table == pytest.approx((0.6, 0.1, 0.1))


def test_cesaro_constant_and_half_steps():
    grid = [1.0, 10.0, 100.0]
    rep = cesaro_check(lambda k: np.full(k.shape, 3.0), 3.0, grid, horizon=3000)
    assert np.all(rep.errors == 0.0)
    sym = cesaro_check(lambda k: np.where(k > 0, 1.0, np.where(k == 0, 0.5, 0.0)), 0.5, grid, 3000)
    assert np.all(sym.errors == 0.0)
    # with a_0 = 1 the centre weight is unpaired: error is exactly q(0) / 2
    step = cesaro_check(lambda k: (k >= 0).astype(float), 0.5, grid, 3000)
    expected = [geometric_direct(s, 0) / 2 for s in grid]
    assert step.errors == pytest.approx(expected, rel=1e-9)


def test_cesaro_alternating():
    grid = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
    rep = cesaro_check(lambda k: (-1.0) ** k, 0.0, grid, horizon=3000)
    # |sum q(k) (-1)^k| = tanh(1/(2 sigma))^2
    assert rep.errors == pytest.approx([math.tanh(0.5 / s) ** 2 for s in grid], rel=1e-6)
    assert rep.errors[-1] < 1e-3
    assert np.all(np.diff(rep.errors) < 0) and rep.largest_is_min


def test_cesaro_insufficient_horizon():
    with pytest.raises(InsufficientHorizonError, match="insufficient horizon"):
        cesaro_check(lambda k: np.ones(k.shape), 1.0, [100.0], horizon=100)
