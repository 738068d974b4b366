import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from torusreg.constructions import random_band_limited
from torusreg.lattice import FourierMap, ShellSpectrum
from torusreg.norms import (
    BlockSeries,
    BlockSpec,
    WeightFn,
    block_sums,
    cauchy_tail,
    derivative_sup_partial_sums,
    embedding_check,
    fit_log_slope,
    fit_rate,
    l1_power_lower_bound,
    multi_indices,
    sobolev_weight_norm,
    weight_bound_check,
    weight_partial_sums,
    weighted_block_norm,
)


def oracle_block_norm(f, b, tau):
    """Independent loop: integer block search, exact per-block fsum."""
    blocks = {}
    for k, row in zip(f.ks.tolist(), f.cs.tolist()):
        r = sum(abs(v) for v in k)
        if r == 0:
            continue
        nu = 0
        while b ** nu < r:
            nu += 1
        e = sum(abs(c) ** 2 for c in row)
        blocks.setdefault(nu, []).append(e * r ** (2 * tau + 2))
    return math.fsum(math.sqrt(math.fsum(v)) for v in blocks.values())


def test_single_mode_value():
    f = FourierMap.cosine((1, 2))
    val, series = weighted_block_norm(f, BlockSpec(2, 1.0))
    assert abs(val - math.sqrt(40.5)) < 1e-12
    assert list(series.theta) == [0.0, 0.0, 40.5]


def test_zero_map_norm():
    val, series = weighted_block_norm(FourierMap.zeros(2), BlockSpec())
    assert val == 0.0 and series.theta.size == 0


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("b", [2, 3])
def test_block_norm_matches_oracle(seed, b):
    f = random_band_limited(2 + seed % 2, 1 + seed % 3, 9, 1.5, seed)
    tau = (1 + seed % 2) + 0.5 * (seed % 3)
    val, _ = weighted_block_norm(f, BlockSpec(b, tau))
    assert val == pytest.approx(oracle_block_norm(f, b, tau), rel=1e-13)


def test_block_norm_dominates_flat_sobolev_norm():
    # l1 over blocks of l2 norms >= global l2 norm
    for seed in range(5):
        f = random_band_limited(2, 1, 10, 1.0, seed)
        val, _ = weighted_block_norm(f, BlockSpec(2, 1.0))
        assert val >= sobolev_weight_norm(f, 1.0) * (1 - 1e-14)


def test_block_series_partials():
    s = BlockSeries(np.array([4.0, 9.0, 0.0, 16.0]))
    assert list(s.partials) == [2.0, 5.0, 5.0, 9.0]
    assert s.total == 9.0
    assert s.rows()[1] == (1, 9.0, 3.0, 5.0)
    with pytest.raises(ValueError):
        BlockSeries(np.array([-1.0]))


def test_shell_spectrum_norms_match_materialized_map():
    s = ShellSpectrum(2, (1, 2, 3, 8, 9), (-0.5, -1.0, -2.0, -3.0, -3.5))
    f = s.to_fourier_map()
    for b in (2, 3):
        assert weighted_block_norm(s, BlockSpec(b, 1.0))[0] == pytest.approx(
            weighted_block_norm(f, BlockSpec(b, 1.0))[0], rel=1e-14)
        w = WeightFn.log_power(1.5)
        assert np.allclose(block_sums(s, b, 4.0, w), block_sums(f, b, 4.0, w), rtol=1e-14)
    assert sobolev_weight_norm(s, 1.0) == pytest.approx(sobolev_weight_norm(f, 1.0), rel=1e-14)
    assert derivative_sup_partial_sums(s, 1, [3, 9]) == pytest.approx(
        derivative_sup_partial_sums(f, 1, [3, 9]), rel=1e-14)


def test_weight_functions():
    w = WeightFn.log_power(2.0)
    assert w(np.e - 1) == pytest.approx(1.0)
    assert float(w.log(2.0 ** 59)) == pytest.approx(2 * math.log(math.log1p(2.0 ** 59)))
    t = WeightFn.table([1.0, 2.0, 4.0], [1.0, 3.0, 5.0])
    assert t(3.0) == pytest.approx(4.0)
    assert WeightFn.constant(2.5)(7.0) == 2.5


def test_weight_bound_check_single_mode():
    f = FourierMap.cosine((1, 2))
    spec = BlockSpec(2, 1.0)
    w = WeightFn.log_power(2.0)
    chk = weight_bound_check(f, spec, w, 2)
    rhs = sum(1 / math.log1p(2.0 ** (nu - 1)) ** 2 for nu in range(3)) + 40.5 * math.log1p(3) ** 2
    assert chk.rhs == pytest.approx(rhs, rel=1e-14)
    assert chk.holds and chk.lhs == pytest.approx(math.sqrt(40.5))


def test_weight_partial_sums_end_at_full_norm():
    f = random_band_limited(2, 1, 10, 1.0, 7)
    w = WeightFn.log_power(1.0)
    p = weight_partial_sums(f, 1.0, w, 2)
    assert p[-1] == pytest.approx(sobolev_weight_norm(f, 1.0, w), rel=1e-13)
    assert (np.diff(p) >= 0).all()


def test_check_dimension_warns():
    with pytest.warns(UserWarning):
        weighted_block_norm(FourierMap.cosine((1, 0, 0)), BlockSpec(2, 1.0))


def test_majorant_partial_sums():
    f = FourierMap.cosine((1, 1), 2.0) + FourierMap.cosine((3, 0), 1.0)
    p = derivative_sup_partial_sums(f, 1, [1, 2, 3])
    # modes: +-(1,1) with |c| = 1, +-(3,0) with |c| = 1/2
    assert list(p) == [0.0, 4.0, 7.0]
    with pytest.raises(ValueError):
        derivative_sup_partial_sums(f, 1, [2, 2])


@pytest.mark.parametrize("order", [0, 1, 2])
def test_embedding_majorant_bounds_derivatives(order):
    f = random_band_limited(2, 2, 6, 2.0, 11)
    assert embedding_check(f, order, 32).holds


def test_multi_indices():
    assert multi_indices(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert len(multi_indices(3, 3)) == math.comb(5, 2)


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=6).filter(any), st.floats(1.0, 12.0))
def test_l1_power_lower_bound_property(k, sigma):
    total, bound, ok = l1_power_lower_bound(k, sigma)
    assert ok and total >= bound


def test_l1_power_lower_bound_contract():
    with pytest.raises(ValueError):
        l1_power_lower_bound([0, 0], 2.0)
    with pytest.raises(ValueError):
        l1_power_lower_bound([1, -1], 2.0)
    with pytest.raises(ValueError):
        l1_power_lower_bound([1, 1], 0.5)


def test_fit_rate_recovers_constant():
    nu = np.arange(10, 61)
    fit = fit_rate(nu, 0.7 / (nu * np.log(nu)), lambda v: 1 / (v * np.log(v)))
    assert fit.c == pytest.approx(0.7, rel=1e-12)
    assert fit.max_rel_dev < 1e-12


def test_fit_log_slope_and_tail():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_log_slope(x, 3 * x ** 0.5)
    assert fit.slope == pytest.approx(0.5) and fit.r2 == pytest.approx(1.0)
    assert cauchy_tail([1.0, 1.5, 1.75]) == 0.25
    assert cauchy_tail([2.0]) == 2.0


def test_sobolev_weight_norm_examples():
    f = FourierMap.cosine((1, 2))
    assert sobolev_weight_norm(f, 1.0) == pytest.approx(math.sqrt(40.5), abs=1e-12)
    assert sobolev_weight_norm(f, 1.0, WeightFn.log_power(2.0)) == pytest.approx(
        math.sqrt(40.5) * math.log(4.0), rel=1e-13)
    assert sobolev_weight_norm(FourierMap.zeros(2), 1.0) == 0.0


def test_two_blocks_add_separately():
    f = FourierMap.cosine((1, 0)) + FourierMap.cosine((5, 3))
    val, series = weighted_block_norm(f, BlockSpec(2, 1.0))
    t0, t3 = 2 * 0.25 * 1.0, 2 * 0.25 * 8.0 ** 4
    assert series.theta[0] == pytest.approx(t0) and series.theta[3] == pytest.approx(t3)
    assert val == pytest.approx(math.sqrt(t0) + math.sqrt(t3), rel=1e-14)


def test_weight_bound_check_zero_map():
    chk = weight_bound_check(FourierMap.zeros(2), BlockSpec(2, 1.0), WeightFn.log_power(2.0), 20)
    assert chk.lhs == 0.0 and chk.holds


def test_l1_power_lower_bound_examples():
    assert l1_power_lower_bound((1, 1), 1.0) == (2.0, 0.5, True)
    total, bound, ok = l1_power_lower_bound((3, 0, 4), 2.0)
    assert total == 25.0 and bound == pytest.approx(49 / 27) and ok


def test_majorant_single_mode():
    f = FourierMap.cosine((1, 2))
    p = derivative_sup_partial_sums(f, 2, [3, 5, 10])
    assert list(p) == pytest.approx([9.0, 9.0, 9.0])


@pytest.mark.parametrize("k,sigma", [((565,), 3.412143183885643), ((892,), 4.774477758869651)])
def test_l1_power_lower_bound_equality_case(k, sigma):
    total, bound, ok = l1_power_lower_bound(k, sigma)
    assert ok and total == pytest.approx(bound, rel=1e-15)
