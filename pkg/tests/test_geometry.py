import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypkpp.errors import InvalidDimension, InvalidTime, OutOfDomain
from hypkpp.geometry import (
    SymmetryClass,
    curvature_H,
    drift_gap,
    drift_h1,
    heat_kernel_bound_h,
    heat_kernel_bound_h_shifted,
    heat_kernel_P3,
    kernel_ratio,
    kernel_ratio_check,
    p3_mass,
    radial_heat_residual,
    signed_drift_gap,
)


class _Frame:
    def __init__(self, r):
        self.r = r

    def R(self, t):
        return self.r


def test_class_parse_and_domain():
    assert SymmetryClass.parse("Elliptic") is SymmetryClass.ELLIPTIC
    assert SymmetryClass.ELLIPTIC.domain_I == (0.0, math.inf)
    with pytest.raises(OutOfDomain):
        SymmetryClass.parse("spherical")


def test_drift_examples():
    assert drift_h1("parabolic", 3.7) == 1.0
    assert drift_h1("hyperbolic", 0.0) == 0.0
    assert abs(drift_h1("elliptic", 20.0) - 1.0) < 1e-15
    with pytest.raises(OutOfDomain):
        drift_h1("elliptic", 0.0)


def test_drift_laurent_branch():
    r = 1e-7
    assert drift_h1("elliptic", r) == pytest.approx(1 / r + r / 3, rel=1e-15)


def test_drift_gap_examples():
    assert drift_gap("parabolic", 5.0) == 0.0
    assert drift_gap("hyperbolic", 0.0) == 1.0
    # oracle: 2/(e^2 - 1)
    assert drift_gap("elliptic", 1.0) == pytest.approx(0.31303528549933130, rel=1e-14)


@pytest.mark.parametrize("kind", ["elliptic", "hyperbolic", "parabolic"])
def test_drift_gap_matches_difference(kind):
    rho = np.linspace(0.1, 30.0, 3000)
    np.testing.assert_allclose(drift_gap(kind, rho), np.abs(drift_h1(kind, rho) - 1.0), rtol=0, atol=1e-13)


def test_signed_gap_sign():
    assert signed_drift_gap("elliptic", 1.0) > 0
    assert signed_drift_gap("hyperbolic", 1.0) < 0


def test_curvature_examples():
    assert curvature_H("parabolic", 3, 0.4, 5.0, _Frame(2.0)) == 0.0
    # oracle: 2 * 2/(e^20 - 1)
    assert curvature_H("elliptic", 3, 0.0, 5.0, _Frame(10.0)) == pytest.approx(8.2446224e-09, rel=1e-7)
    assert curvature_H("hyperbolic", 2, 0.0, 5.0, _Frame(0.0)) == -1.0
    with pytest.raises(InvalidDimension):
        curvature_H("hyperbolic", 1, 0.0, 5.0, _Frame(0.0))


def test_curvature_decay_weighted():
    # e^{3 tau / 2} sup |H| with R(t) = t: (d-1) t^{3/2} * 2/(e^{2t}-1), decreasing for t >= 2
    vals = []
    for t in [2.0, 4.0, 8.0, 16.0, 32.0]:
        rho = np.linspace(0.0, 10.0, 101)
        h = np.abs(curvature_H("elliptic", 3, rho, t, _Frame(t))).max()
        vals.append(t**1.5 * h)
    assert np.all(np.diff(vals) < 0)


def test_heat_kernel_values():
    # oracle: closed forms
    assert heat_kernel_P3(0.0, 1.0) == pytest.approx((4 * math.pi) ** -1.5 * math.exp(-1), rel=1e-14)
    assert heat_kernel_P3(0.0, 1.0) == pytest.approx(8.2583012661242e-03, rel=1e-12)
    expect = (4 * math.pi) ** -1.5 * (2 / math.sinh(2)) * math.exp(-2)
    assert heat_kernel_P3(2.0, 1.0) == pytest.approx(expect, rel=1e-14)
    with pytest.raises(InvalidTime):
        heat_kernel_P3(1.0, 0.0)
    with pytest.raises(OutOfDomain):
        heat_kernel_P3(-1.0, 1.0)


def test_heat_kernel_series_branch_continuous():
    a = heat_kernel_P3(0.99e-4, 1.0)
    b = heat_kernel_P3(1.01e-4, 1.0)
    assert abs(a - b) / a < 1e-8


def test_bound_h_values():
    assert heat_kernel_bound_h(3, 0.0, 1.0) == pytest.approx((4 * math.pi) ** -1.5 * math.exp(-1), rel=1e-14)
    expect = 2 * 3**-0.5 / (4 * math.pi) * math.exp(-0.25 - 0.5 - 0.25)
    assert heat_kernel_bound_h(2, 1.0, 1.0) == pytest.approx(expect, rel=1e-14)
    assert heat_kernel_bound_h(4, 2.0, 0.5) == pytest.approx(heat_kernel_bound_h_shifted(4, 2.0, 0.5), rel=1e-13)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0, 100.0])
def test_p3_mass_against_mpmath(t):
    # oracle: mpmath quadrature of P_t(r) 4 pi sinh(r)^2 at 30 digits
    mpmath.mp.dps = 30
    tt = mpmath.mpf(t)
    f = lambda r: (4 * mpmath.pi * tt) ** -1.5 * r * mpmath.sinh(r) * mpmath.e ** (-tt - r**2 / (4 * tt)) * 4 * mpmath.pi
    peak = 2 * t
    ref = mpmath.quad(f, [0, max(peak, 1), peak + 20 * math.sqrt(t) + 20, mpmath.inf])
    assert abs(float(ref) - 1.0) < 1e-20
    assert abs(p3_mass(t) - 1.0) < 1e-10


def test_kernel_ratio_closed_form():
    # oracle: P/h = 2r / ((1 - e^{-2r})(1 + r)) for d = 3, independent of t
    r = np.array([1e-6, 0.5, 1.0, 5.0, 20.0])
    expect = np.where(r < 1e-3, 1.0, 2 * r / ((1 - np.exp(-2 * r)) * (1 + r)))
    for t in (0.1, 1.0, 10.0):
        np.testing.assert_allclose(kernel_ratio(r, t), expect, rtol=1e-9)


def test_ratio_check_bounded():
    lo, hi = kernel_ratio_check(1.0, 20.0, 1000)
    assert 0.1 < lo <= hi < 10.0
    lo, hi = kernel_ratio_check(10.0, 50.0, 1000)
    assert 0.1 < lo <= hi < 10.0
    assert hi == pytest.approx(100 / 51 / (1 - math.exp(-100)), rel=1e-9)


def test_p3_monotone_in_r():
    r = np.linspace(0, 30, 3001)
    for t in (0.1, 1.0, 10.0):
        p = heat_kernel_P3(r, t)
        assert np.all(np.diff(p) <= 0)


@settings(max_examples=25, deadline=None)
@given(r=st.floats(0.2, 8.0), t=st.floats(0.3, 20.0))
def test_radial_heat_residual(r, t):
    assert radial_heat_residual(r, t) < 1e-6
