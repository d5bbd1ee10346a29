import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabolic_fts.errors import DivergenceError, DomainError, HorizonError
from parabolic_fts.schedule import (check_rapid_convergence, partial_sums, schedule_case1,
                                    schedule_case2, schedule_custom, segment_of, zeta)


@pytest.mark.parametrize("p", [1.01, 1.5, 1.9, 2.0, 3.0, 7.5])
def test_zeta_matches_mpmath(p):
    assert zeta(p) == pytest.approx(float(mpmath.zeta(p)), abs=1e-11)


def test_zeta_known_values():
    assert zeta(2.0) == pytest.approx(math.pi**2 / 6, abs=1e-12)
    assert zeta(1.9) == pytest.approx(1.7497, abs=1e-4)


@pytest.mark.parametrize("p", [1.0, 0.5, -2.0, math.nan])
def test_zeta_diverges(p):
    with pytest.raises(DivergenceError):
        zeta(p)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.05, 10.0))
def test_zeta_property(p):
    z = zeta(p)
    assert z > 1.0
    assert z == pytest.approx(float(mpmath.zeta(p)), abs=2e-11)
    # integral bounds 1/(p-1) < zeta(p) < p/(p-1)
    assert 1 / (p - 1) < z < p / (p - 1)


def test_case1_preset_values():
    s = schedule_case1(1.9, 3.5, 2)
    np.testing.assert_allclose(s.t[:3], [0.0, 1.0, 1 + 2**-1.9], rtol=0, atol=1e-15)
    assert s.t[2] == pytest.approx(1.2679, abs=1e-4)
    assert s.t[3] == pytest.approx(1.7497, abs=1e-4) and s.T0 == s.t[3]
    assert s.lam[0] == 3.5 and s.lam[1] == 4.5
    assert s.lam[2] == pytest.approx(2**5.8 + 3.5, rel=1e-15)
    assert s.lam[2] == pytest.approx(59.2152, abs=1e-4)
    assert s.n_segments == 3 and s.final_segment_extended


def test_case2_preset_values():
    s = schedule_case2(1.5, 3.5, 2)
    assert s.t.tolist() == [0.0, 0.75, 1.0, 1.5]
    assert s.lam.tolist() == [3.5, 4.5, 67.5]
    assert s.segment(2) == (1.0, 1.5)


def test_partial_sums():
    s = partial_sums([0, 1, 3], [2, 5])
    assert s.tolist() == [0, 2, 12]


def test_schedule_errors():
    with pytest.raises(DivergenceError):
        schedule_case1(1.0, 3.5, 2)
    with pytest.raises(DomainError):
        schedule_case2(-1.0, 3.5, 2)
    with pytest.raises(DomainError):
        schedule_case1(1.9, 0.0, 2)
    with pytest.raises(DomainError):
        schedule_case2(1.5, 3.5, 0)
    with pytest.raises(DomainError):
        schedule_custom([0, 1, 0.5], [1, 2])


def test_segment_of():
    s = schedule_case2(1.5, 3.5, 2)
    assert segment_of(s, 0.0) == 0
    assert segment_of(s, 0.75) == 1  # gain switches at t_n
    assert segment_of(s, 0.7499) == 0
    assert segment_of(s, 1.49) == 2
    with pytest.raises(HorizonError):
        segment_of(s, 1.5)


def test_rapid_convergence_presets():
    for s in (schedule_case1(1.9, 3.5, 2), schedule_case2(1.5, 3.5, 2)):
        rep = check_rapid_convergence(s)
        assert rep.satisfied
        assert rep.first_index is not None and rep.q_increasing_from is not None
        assert np.all(rep.r[rep.first_index:] >= 1.0)
        assert np.all(np.diff(rep.q[rep.q_increasing_from:]) > 0)


def test_rapid_convergence_fails_for_constant_gain():
    s = schedule_custom(np.linspace(0, 1, 11), np.full(10, 2.0))
    rep = check_rapid_convergence(s, gamma0=1.0)
    assert not rep.satisfied


@settings(max_examples=40)
@given(st.floats(1.1, 4.0), st.floats(0.1, 20.0), st.integers(1, 8))
def test_case1_structure(p, lam0, n_max):
    s = schedule_case1(p, lam0, n_max)
    assert len(s.t) == n_max + 2 and len(s.lam) == n_max + 1
    assert np.all(np.diff(s.t) > 0) and np.all(np.diff(s.lam) > 0)
    assert s.t[-1] == s.T0
    np.testing.assert_allclose(s.s, partial_sums(s.t, s.lam))
    np.testing.assert_allclose(np.diff(s.t)[:-1], 1.0 / np.arange(1, n_max + 1) ** p)


@settings(max_examples=40)
@given(st.floats(0.01, 100.0), st.integers(1, 8))
def test_case2_structure(T0, n_max):
    s = schedule_case2(T0, 3.5, n_max)
    assert s.t[0] == 0 and s.T0 == T0
    assert np.all(np.diff(s.t) > 0)
    assert s.lam[n_max] == n_max**6 + 3.5
