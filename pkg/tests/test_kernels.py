import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from parabolic_fts.errors import DomainError, ShapeError, UnsupportedRegimeError
from parabolic_fts.kernels import (KernelField, KernelParams, bessel_i1, bessel_j1,
                                   direct_transform, gain_row, inverse_transform,
                                   kernel_field, kernel_k_const, kernel_l_const,
                                   kernel_residual, volterra_weights)
from parabolic_fts.pde import Grid, l2_norm

mpmath.mp.dps = 40


def series_oracle(z, sign, terms=40):
    z = mpmath.mpf(z)
    return float(mpmath.fsum(sign**m * (z / 2) ** (2 * m + 1) / (mpmath.factorial(m) * mpmath.factorial(m + 1))
                             for m in range(terms)))


# frozen from the 40-term, 40-digit oracle above
I1_AT_2 = 1.5906368546373291
J1_AT_2 = 0.57672480775687339


def test_frozen_oracle_values_reproduce():
    assert series_oracle(2, 1) == pytest.approx(I1_AT_2, rel=1e-15)
    assert series_oracle(2, -1) == pytest.approx(J1_AT_2, rel=1e-15)


def test_bessel_at_two():
    assert bessel_i1(2.0) == pytest.approx(I1_AT_2, rel=1e-14)
    assert bessel_j1(2.0) == pytest.approx(J1_AT_2, rel=1e-14)


def test_bessel_zero_and_small_ratio():
    assert bessel_i1(0.0) == 0.0
    assert bessel_j1(0.0) == 0.0
    assert bessel_i1(1e-8) / 1e-8 == pytest.approx(0.5)
    assert bessel_j1(1e-8) / 1e-8 == pytest.approx(0.5)


def test_j1_first_zero_bracket():
    assert bessel_j1(3.8) > 0 > bessel_j1(3.9)
    lo, hi = 3.8, 3.9
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if bessel_j1(mid) > 0 else (lo, mid)
    assert lo == pytest.approx(float(mpmath.besseljzero(1, 1)), abs=1e-12)


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_bessel_domain(bad):
    with pytest.raises(DomainError):
        bessel_i1(bad)
    with pytest.raises(DomainError):
        bessel_j1(bad)


@given(st.floats(0.0, 30.0))
def test_i1_matches_scipy(z):
    assert bessel_i1(z) == pytest.approx(special.i1(z), rel=1e-13, abs=1e-300)


@given(st.floats(0.0, 200.0))
def test_j1_matches_mpmath(z):
    assert bessel_j1(z) == pytest.approx(float(mpmath.besselj(1, z)), abs=5e-13)


def test_bessel_vectorized():
    z = np.linspace(0, 10, 11)
    np.testing.assert_allclose(bessel_i1(z), special.i1(z), rtol=1e-13)


def test_kernel_examples():
    p = KernelParams(4.5, 1.0, 24.0)
    assert kernel_k_const(0.7, 0.0, p) == 0.0
    assert kernel_k_const(0.6, 0.6, p) == pytest.approx(-28.5 * 0.6 / 2, rel=1e-14)
    z = math.sqrt(21.375)
    assert kernel_k_const(1.0, 0.5, p) == pytest.approx(-14.25 * series_oracle(z, 1) / z, rel=1e-13)
    q = KernelParams(1.0, 1.0, 24.0)
    z = math.sqrt(18.75)
    assert kernel_l_const(1.0, 0.5, q) == pytest.approx(-12.5 * series_oracle(z, -1) / z, rel=1e-12)
    assert kernel_l_const(0.3, 0.3, q) == pytest.approx(-25 * 0.3 / 2, rel=1e-14)


def test_kernel_errors():
    with pytest.raises(DomainError):
        kernel_k_const(0.3, 0.5, KernelParams(1.0, 1.0, 24.0))
    with pytest.raises(UnsupportedRegimeError):
        kernel_k_const(1.0, 0.5, KernelParams(1.0, 1.0, -30.0))
    with pytest.raises(UnsupportedRegimeError):
        kernel_l_const(1.0, 0.5, KernelParams(1.0, 1.0, -1.0))


@settings(max_examples=50)
@given(st.floats(0.5, 100.0), st.floats(0.2, 5.0), st.floats(-0.4, 50.0), st.floats(0.0, 1.0))
def test_kernel_boundary_and_diagonal(lam, a, c, x):
    p = KernelParams(lam, a, c)
    mu = (lam + c) / a
    assert kernel_k_const(x, 0.0, p) == 0.0
    assert kernel_l_const(x, 0.0, p) == 0.0
    assert kernel_k_const(x, x, p) == pytest.approx(-mu * x / 2, rel=1e-14, abs=1e-300)
    assert kernel_l_const(x, x, p) == pytest.approx(-mu * x / 2, rel=1e-14, abs=1e-300)


def test_gain_row_matches_analytic_integral():
    # ∫0^1 k(1,y) dy = 1 - I0(sqrt(mu)) for a = 1
    p = KernelParams(1.0, 1.0, 24.0)
    row = gain_row(p, Grid(2001))
    exact = 1.0 - special.i0(5.0)
    assert row.samples[0] == 0.0
    assert len(row.samples) == 2001
    assert row.apply(np.ones(2001)) == pytest.approx(exact, abs=1e-6)
    assert row.apply(np.zeros(2001)) == 0.0


def test_gain_row_independent_quadrature():
    p = KernelParams(4.5, 1.0, 24.0)
    g = Grid(401)
    row = gain_row(p, g)
    ref, _ = integrate.quad(lambda y: kernel_k_const(1.0, y, p) * math.sin(math.pi * y), 0, 1,
                            epsabs=1e-13)
    assert row.apply(np.sin(np.pi * g.x)) == pytest.approx(ref, rel=1e-8)


def test_gain_row_csv(tmp_path):
    row = gain_row(KernelParams(1.0, 1.0, 24.0), Grid(11))
    path = row.to_csv(tmp_path / "k.csv")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert path.read_text().splitlines()[0] == "y,k1y"
    np.testing.assert_array_equal(data[:, 1], row.samples)


def test_volterra_weights_integrate_polynomials():
    g = Grid(41)
    W = volterra_weights(g)
    assert np.allclose(np.triu(W, 1), 0.0)
    for deg in range(4):
        # the two-node row is plain trapezoid, exact only to degree 1
        start = 1 if deg <= 1 else 2
        np.testing.assert_allclose((W @ g.x**deg)[start:], g.x[start:] ** (deg + 1) / (deg + 1),
                                   atol=1e-13)


def test_kernel_field_invariants():
    g = Grid(101)
    kf = kernel_field(KernelParams(4.5, 1.0, 24.0), g)
    assert np.all(kf.values_k[:, 0] == 0) and np.all(kf.values_l[:, 0] == 0)
    np.testing.assert_allclose(np.diag(kf.values_k), -28.5 * g.x / 2, atol=1e-12)
    np.testing.assert_allclose(np.diag(kf.values_l), -28.5 * g.x / 2, atol=1e-12)
    np.testing.assert_allclose(kf.values_k[-1], gain_row(kf.params, g).samples, rtol=0, atol=0)


def test_transform_zero_and_identity():
    g = Grid(51)
    kf = kernel_field(KernelParams(4.5, 1.0, 24.0), g)
    assert np.all(direct_transform(np.zeros(51), kf) == 0)
    h = np.cos(3 * g.x)
    np.testing.assert_array_equal(direct_transform(h, KernelField.zeros(g)), h)


def test_transform_against_quad():
    g = Grid(201)
    p = KernelParams(4.5, 1.0, 24.0)
    kf = kernel_field(p, g)
    ht = direct_transform(np.sin(np.pi * g.x), kf)
    for i in (50, 120, 200):
        x = g.x[i]
        ref, _ = integrate.quad(lambda y: kernel_k_const(x, y, p) * math.sin(math.pi * y), 0, x,
                                epsabs=1e-13)
        assert ht[i] == pytest.approx(math.sin(math.pi * x) - ref, rel=1e-7, abs=1e-9)


def test_transform_shape_mismatch():
    kf = kernel_field(KernelParams(4.5, 1.0, 24.0), Grid(21))
    with pytest.raises(ShapeError):
        direct_transform(np.zeros(20), kf)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(1.0, 20.0))
def test_round_trip_property(coefs, lam):
    g = Grid(401)
    kf = kernel_field(KernelParams(lam, 1.0, 24.0), g)
    h = sum(cf * np.sin((j + 1) * np.pi * g.x) for j, cf in enumerate(coefs)) + 0.3 * g.x
    back = inverse_transform(direct_transform(h, kf), kf)
    assert l2_norm(back - h, g) <= 1e-5 * l2_norm(h, g) + 1e-12


def test_round_trip_fourth_order_at_large_gain():
    errs = []
    for n in (201, 401, 801):
        g = Grid(n)
        kf = kernel_field(KernelParams(60.0, 1.0, 24.0), g)
        h = np.sin(np.pi * g.x)
        errs.append(l2_norm(inverse_transform(direct_transform(h, kf), kf) - h, g))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.5)


def test_kernel_residual_converges():
    p = KernelParams(4.5, 1.0, 24.0)
    errs = [kernel_residual(kernel_field(p, Grid(n)))[0] for n in (51, 101, 201)]
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0
    assert kernel_residual(kernel_field(p, Grid(101)), "l")[2] == 0.0
