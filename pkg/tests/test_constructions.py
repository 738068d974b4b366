import math

import numpy as np
import pytest

from torusreg.constructions import (
    PAIRING_FACTOR,
    SingularProfile,
    critical_sphere_example,
    no_weak_derivative_example,
    random_band_limited,
    singular_example,
    sphere_profile,
    unbounded_derivative_example,
)
from torusreg.lattice import ShellSpectrum
from torusreg.norms import BlockSpec, weighted_block_norm


@pytest.mark.parametrize("log_alpha", [0.5, 1.0, 2.0])
def test_sphere_profile_formula(log_alpha):
    p = sphere_profile(2, 1.0, 2, log_alpha, 30)
    power = 1.0 if log_alpha <= 1 else (1 + log_alpha) / 2
    for nu in (2, 7, 30):
        lhs = 2.0 ** ((2 * 1.0 + 2 + 1) * nu / 2) * p.h(nu)
        assert lhs == pytest.approx(1 / (nu ** power * math.log(nu)), rel=1e-12)


def test_critical_example_support_is_spheres():
    s = critical_sphere_example(2, 1.0, 2, 1.0, 8)
    assert isinstance(s, ShellSpectrum)
    assert list(s.radii) == [2 ** (v - 1) for v in range(2, 9)]
    f = s.to_fourier_map()
    r = np.abs(f.ks).sum(axis=1)
    assert set(r.tolist()) == set(s.radii)
    # equal real coefficients on each sphere
    for rad in s.radii:
        vals = f.cs[r == rad, 0]
        assert np.allclose(vals, vals[0]) and np.abs(vals.imag).max() == 0


def test_critical_example_block_terms():
    # the sphere of radius b^(v-1) closes block v-1
    s = critical_sphere_example(2, 1.0, 2, 1.0, 12)
    _, series = weighted_block_norm(s, BlockSpec(2, 1.0))
    for v in range(3, 13):
        # S_2(r) = 4 r points, Theta = 4 r h^2 r^(2 tau + 2)
        rr = 2.0 ** (v - 1)
        expected = math.sqrt(4 * rr * rr ** 4) * math.exp(sphere_profile(2, 1.0, 2, 1.0, 12).log_h[v - 2])
        assert series.sqrt_theta[v - 1] == pytest.approx(expected, rel=1e-12)


def test_unbounded_example_coefficients():
    f = unbounded_derivative_example(2, 1.0, 2.0, 10)
    assert f.real and f.conj_mismatch() == 0.0
    c = f.coeff((2, 3))
    amp = 5.0 ** -(1.0 + 1 + 1) * math.log(5.0) ** -2
    assert c == pytest.approx([amp / 2, amp / 2])
    assert f.size == 2 * sum(r + 1 for r in range(2, 11))
    with pytest.raises(ValueError):
        unbounded_derivative_example(2, 1.0, 1.0, 10)


def test_no_weak_example_theta():
    f = no_weak_derivative_example(2, 1.0, 2, 12)
    total, series = weighted_block_norm(f, BlockSpec(2, 1.0))
    nu = np.arange(1, 13)
    assert np.allclose(series.theta[1:], 2 * nu ** -4.0, rtol=1e-13)
    assert total == pytest.approx(PAIRING_FACTOR * float(np.sum(nu ** -2.0)), rel=1e-13)


def test_random_fixture_is_real_and_reproducible():
    a = random_band_limited(3, 2, 5, 1.0, 42)
    b = random_band_limited(3, 2, 5, 1.0, 42)
    c = random_band_limited(3, 2, 5, 1.0, 43)
    assert a.conj_mismatch() == 0.0
    assert np.array_equal(a.cs, b.cs) and not np.array_equal(a.cs, c.cs)
    assert a.mean().tolist() == [0.0, 0.0]
    r = np.abs(a.ks).sum(axis=1)
    assert r.max() <= 5
    assert (np.abs(a.cs).max(axis=1) <= r ** -1.0 + 1e-15).all()


def test_singular_profile_validation():
    with pytest.raises(ValueError):
        SingularProfile(2, 0.5)
    with pytest.raises(ValueError):
        SingularProfile(2, 1.0, inner=0.3, outer=0.2)


def test_singular_target_shape():
    p = SingularProfile(2, 1.2)
    r = np.array([0.01, 0.1, 0.2, 0.3])
    t = p.target(r)
    assert t[0] == pytest.approx(0.01 ** -1 * (-math.log(0.01)) ** -1.2)
    assert t[1] == pytest.approx(0.1 ** -1 * (-math.log(0.1)) ** -1.2)
    assert 0 < t[2] < 0.2 ** -1 * (-math.log(0.2)) ** -1.2
    assert t[3] == 0.0


@pytest.mark.parametrize("order", [1, 2, 3])
def test_potential_table_matches_direct_quadrature(order):
    p = SingularProfile(2, 1.6)
    radii = np.array([0.0, 0.003, 0.05, 0.125, 0.17, 0.24, 0.3])
    tab = p.potential_table(radii, order)
    direct = np.array([p.potential(r, order) for r in radii])
    assert np.abs(tab - direct).max() <= 1e-12 * max(1.0, np.abs(direct).max())


def test_potential_derivative_lowers_order():
    # d/dr P_j(r) = -P_(j-1)(r), checked by central differences
    p = SingularProfile(2, 1.6)
    h = 1e-5
    for r in (0.05, 0.15, 0.2):
        d = (p.potential(r + h, 2) - p.potential(r - h, 2)) / (2 * h)
        assert d == pytest.approx(-p.potential(r, 1), rel=1e-6)
        d1 = (p.potential(r + h, 1) - p.potential(r - h, 1)) / (2 * h)
        assert d1 == pytest.approx(-float(p.target(r)), rel=1e-6)


@pytest.mark.parametrize("sigma", [0.8, 1.6])
def test_singular_l2_two_oracles_agree(sigma):
    p = SingularProfile(2, sigma)
    assert p.l2_reduced() == pytest.approx(p.l2_cartesian(), rel=1e-9)


def test_singular_example_grid_is_radial():
    f, fm, tgt = singular_example(2, 1.6, 64, 8)
    v = f.values[..., 0]
    assert v[1, 0] == v[0, 1] == v[-1, 0] == v[0, -1]
    assert v[3, 4] == v[4, 3] == v[5, 0]
    assert tgt.values[0, 0, 0] == tgt.values[1, 0, 0]
    assert fm.conj_mismatch() < 1e-14
    with pytest.raises(ValueError):
        singular_example(2, 1.6, 48, 8)


def test_example_support_counts():
    from torusreg.lattice import sphere_count
    s = critical_sphere_example(2, 1.0, 2, 1.0, 3)
    assert s.to_fourier_map().size == sphere_count(2, 2) + sphere_count(2, 4)
    assert no_weak_derivative_example(2, 1.0, 2, 5).size == 10
    f = random_band_limited(2, 2, 1, 1.0, 3)
    assert f.size <= 2 * 2


def test_random_fixture_with_fast_decay_has_finite_norm():
    f = random_band_limited(2, 1, 50, 3.0, 0)
    val, series = weighted_block_norm(f, BlockSpec(2, 1.0))
    assert math.isfinite(val) and val > 0 and series.theta[-1] < series.theta.max()
