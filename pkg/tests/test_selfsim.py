import math
import warnings

import numpy as np
import pytest

from hypkpp.errors import CoverageError, InvalidParameter, InvalidTime, OverflowGuard
from hypkpp.evolve import Field, Grid1D
from hypkpp.reaction import logistic
from hypkpp.selfsim import (
    DIPOLE_NORM,
    FrameParams,
    R_of_t,
    SelfSimField,
    beta_from_alpha,
    dipole,
    dipole_distance,
    dipole_moment,
    fp_evolve,
    fp_operator_L,
    fp_operator_M,
    fp_step,
    matched_beta,
    scheme_frame,
    to_moving_frame,
    to_selfsim,
)


def _phi0(deta=0.01, eta_max=12.0):
    return SelfSimField.uniform(dipole, eta_max, deta)


def test_R_of_t_examples():
    assert R_of_t(FrameParams(2.0, 0.75), 1.0) == 2.0
    assert R_of_t(FrameParams(2.0, 0.75, 5.0), math.e) == pytest.approx(2 * math.e - 0.75 + 5, abs=1e-14)
    with pytest.raises(InvalidTime):
        R_of_t(FrameParams(2.0, 0.75), 0.5)


def test_frame_from_reaction():
    fr = FrameParams.from_reaction(logistic(4.0), 3)
    assert fr.c_star == 2.0 and fr.k == 0.75
    assert 2.0 * fr.k == 1.5


def test_scheme_frame_close_to_theory():
    fr = scheme_frame(logistic(4.0), 3, 0.05, 0.01)
    assert fr.c_star == pytest.approx(1.9982005766, abs=1e-9)
    assert abs(fr.k - 0.75) < 1e-3


def _field(grid, values, s):
    return Field(grid, np.asarray(values, dtype=float), time=s)


def test_moving_frame_constant_and_shift():
    fr = FrameParams(2.0, 0.75)
    g = Grid1D.from_spacing(0.0, 400.0, 0.05)
    s = 99.0
    const = to_moving_frame(_field(g, np.ones(g.n), s), fr)
    assert np.all(const.values == 1.0)
    shift = R_of_t(fr, s + 1)
    # exponential profile: log-space interpolation is exact up to rounding
    fld = _field(g, np.minimum(1.0, np.exp(-(g.nodes - shift))), s)
    hat = to_moving_frame(fld, fr, varrho_min=1.0, varrho_max=60.0)
    assert hat.time == 100.0
    np.testing.assert_allclose(hat.values, np.exp(-hat.rho), rtol=1e-10)


def test_moving_frame_errors():
    fr = FrameParams(2.0, 0.75)
    g = Grid1D.from_spacing(0.0, 100.0, 0.05)
    with pytest.raises(InvalidTime):
        to_moving_frame(_field(g, np.ones(g.n), 0.5), fr)
    with pytest.raises(CoverageError):
        to_moving_frame(_field(g, np.ones(g.n), 99.0), fr)


def test_to_selfsim_examples():
    lam, t = 2.0, 16.0
    g = Grid1D.from_spacing(0.0, 60.0, 0.01)
    r = g.nodes
    zero = to_selfsim(_field(g, np.zeros(g.n), t), lam)
    assert np.all(zero.values == 0.0) and zero.tau == pytest.approx(math.log(16))
    hat = _field(g, r * np.exp(-lam * r), t)
    w = to_selfsim(hat, lam, eta_max=12.0)
    np.testing.assert_allclose(w.values, w.eta, rtol=1e-9, atol=1e-12)
    hat2 = _field(g, 0.3 * np.exp(-lam * r), t)
    w2 = to_selfsim(hat2, lam)
    assert w2.values[0] == pytest.approx(t**-0.5 * 0.3, rel=1e-14)


def test_to_selfsim_guards():
    g = Grid1D.from_spacing(0.0, 500.0, 0.1)
    with pytest.raises(OverflowGuard):
        to_selfsim(_field(g, np.ones(g.n), 1000.0), 2.0, eta_max=12.0)
    with pytest.raises(CoverageError):
        to_selfsim(_field(g, np.ones(g.n), 10000.0), 2.0, eta_max=12.0)
    g2 = Grid1D.from_spacing(1.0, 100.0, 0.1)
    with pytest.raises(CoverageError):
        to_selfsim(_field(g2, np.zeros(g2.n), 4.0), 2.0)


def test_L_annihilates_dipole():
    eta = np.arange(0.0, 8.0 + 5e-4, 1e-3)
    res = fp_operator_L(dipole(eta), eta)
    mask = (eta[1:-1] >= 0.1) & (eta[1:-1] <= 6.0)
    assert np.abs(res[mask]).max() < 1e-6


def test_L_and_M_presentations_agree():
    eta = np.arange(0.0, 8.0 + 5e-4, 1e-3)
    omega = np.sin(eta) * np.exp(-0.1 * eta**2)
    lw = fp_operator_L(np.exp(-eta**2 / 8) * omega, eta)
    lhs = np.exp(eta[1:-1] ** 2 / 8) * lw
    rhs = fp_operator_M(omega, eta)
    assert np.abs(lhs - rhs).max() < 1e-5


def test_dipole_stationary():
    w = _phi0()
    out = fp_evolve(w, 1e-3, 1000)
    assert np.abs(out.values - w.values).max() < 1e-5
    assert out.tau == pytest.approx(1.0)


def test_fp_step_zero_and_linear():
    zero = SelfSimField.uniform(np.zeros_like)
    assert np.all(fp_step(zero, 0.01).values == 0.0)
    rng = np.random.default_rng(7)
    a = SelfSimField.uniform(lambda e: rng.random(e.size) * (e < 4) * (e > 0))
    b = SelfSimField.uniform(lambda e: np.sin(e) ** 2 * np.exp(-e * e / 4))
    comb = SelfSimField(a.eta, 2.0 * a.values - 3.0 * b.values)
    lhs = fp_evolve(comb, 1e-3, 50).values
    rhs = 2.0 * fp_evolve(a, 1e-3, 50).values - 3.0 * fp_evolve(b, 1e-3, 50).values
    assert np.abs(lhs - rhs).max() < 1e-12


def test_grid_requirements():
    with pytest.raises(InvalidParameter):
        fp_step(SelfSimField.uniform(dipole, eta_max=6.0), 0.01)
    eta = np.linspace(1.0, 12.0, 200)
    with pytest.raises(InvalidParameter):
        fp_step(SelfSimField(eta, dipole(eta)), 0.01)
    with pytest.raises(InvalidParameter):
        fp_step(_phi0(), 0.0)


def test_dipole_moment_examples():
    assert dipole_moment(_phi0()) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-8)
    assert DIPOLE_NORM == pytest.approx(3.5449077018110318, rel=1e-15)
    two = SelfSimField(_phi0().eta, 2 * _phi0().values)
    assert dipole_moment(two) == pytest.approx(4 * math.sqrt(math.pi), rel=1e-8)
    assert dipole_moment(SelfSimField.uniform(np.zeros_like)) == 0.0


def test_dipole_moment_truncation_flag():
    w = SelfSimField.uniform(lambda e: np.exp(-e / 4), eta_max=8.0)
    with pytest.warns(UserWarning):
        m = dipole_moment(w)
    assert m.truncated
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not dipole_moment(_phi0()).truncated


def test_moment_conserved():
    rng = np.random.default_rng(11)
    w = SelfSimField.uniform(lambda e: rng.random(e.size) * ((e > 0.5) & (e < 3.0)))
    m0 = dipole_moment(w)
    _, hist = fp_evolve(w, 1e-3, 5000, every=500)
    for h in hist:
        assert abs(dipole_moment(h) / m0 - 1) < 1e-3


def test_dipole_distance_examples():
    w = _phi0()
    assert dipole_distance(SelfSimField(w.eta, 1.7 * w.values), 1.7) == pytest.approx(0.0, abs=1e-15)
    eps = 1e-3
    pert = SelfSimField(w.eta, 1.7 * w.values + eps * np.exp(-w.eta**2 / 4))
    assert dipole_distance(pert, 1.7) == pytest.approx(eps, rel=1e-12)


def test_generic_datum_approaches_dipole():
    rng = np.random.default_rng(3)
    w = SelfSimField.uniform(lambda e: rng.random(e.size) * ((e > 0.2) & (e < 2.5)))
    alpha = dipole_moment(w) / DIPOLE_NORM
    w3 = fp_evolve(w, 1e-3, 3000)
    w6 = fp_evolve(w3, 1e-3, 3000)
    d3, d6 = dipole_distance(w3, alpha), dipole_distance(w6, alpha)
    assert d6 < d3 and d6 < 1e-2


def test_beta_from_alpha():
    assert beta_from_alpha(1.0, 2.0) == (0.0, -0.0)
    plus, minus = beta_from_alpha(math.exp(2.0), 2.0)
    assert plus == pytest.approx(1.0, abs=1e-15) and minus == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(InvalidParameter):
        beta_from_alpha(0.0, 1.0)
    with pytest.raises(InvalidParameter):
        beta_from_alpha(-1.0, 1.0)


def test_matched_beta_formula():
    fr = FrameParams(2.0, 0.75, 1.0)
    # log(alpha / A) / lambda0 = log(e^2) / 2 = 1
    assert matched_beta(3.0 * math.e**2, 3.0, fr, 2.0) == pytest.approx(2.0 + 1.0 + 1.0, abs=1e-14)
