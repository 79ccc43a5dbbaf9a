import math
import time

import numpy as np
import pytest

from hypkpp.errors import IllConditionedFit, NoMonotoneFront, NotNormalizable
from hypkpp.reaction import logistic, polynomial
from hypkpp.waves import (
    WaveProfile,
    decay_rates,
    evaluate,
    minimal_profile,
    normalize_half,
    ode_residual,
    solve_profile,
    tail_fit,
    with_tail,
)


@pytest.fixture(scope="module")
def kpp1():
    return with_tail(normalize_half(solve_profile(logistic(1.0), 2.0)))


def test_minimal_profile_monotone_and_accurate(kpp1):
    assert np.all(np.diff(kpp1.values) < 0)
    assert kpp1.values.max() <= 1.0 and kpp1.values.min() >= 0.0
    assert kpp1.values[0] >= 1 - 1e-8 - 1e-12
    # residual bound: 10 * tol * max|f| with max f = 1/4
    assert np.abs(ode_residual(kpp1, logistic(1.0))).max() < 10 * 1e-8 * 0.25


def test_below_minimal_speed_raises():
    with pytest.raises(NoMonotoneFront):
        solve_profile(logistic(1.0), 1.5)


def test_near_minimal_treated_as_minimal():
    # discriminant between -tol^2 and 0 is the minimal speed
    p = solve_profile(logistic(1.0), 2.0 - 1e-18)
    assert p.is_minimal


def test_supercritical_tail_rate():
    # oracle: smaller root of lam^2 - 5 lam + 1 = 0
    lam_minus = (5 - math.sqrt(21)) / 2
    assert lam_minus == pytest.approx(0.20871215252208, abs=1e-13)
    p = normalize_half(solve_profile(logistic(1.0), 5.0))
    lam, kappa = tail_fit(p)
    assert lam == pytest.approx(lam_minus, rel=1e-3)
    assert math.isnan(kappa)


def test_lambda0_estimates(kpp1):
    lam, _ = tail_fit(kpp1)
    assert 0.98 <= lam <= 1.02
    lam4, _ = tail_fit(normalize_half(solve_profile(logistic(4.0), 4.0)))
    assert 1.96 <= lam4 <= 2.04


def test_tail_fit_synthetic_exact():
    s = np.arange(0.0, 40.0, 0.01)
    p = WaveProfile(c=2.0, s=s, values=(s + 3.0) * np.exp(-s), fprime0=1.0, normalized=True)
    lam, kappa = tail_fit(p, (5.0, 30.0))
    assert lam == pytest.approx(1.0, abs=1e-6)
    assert kappa == pytest.approx(3.0, abs=1e-6)


def test_tail_fit_short_window():
    s = np.arange(0.0, 40.0, 0.01)
    p = WaveProfile(c=2.0, s=s, values=(s + 3.0) * np.exp(-s), fprime0=1.0)
    with pytest.raises(IllConditionedFit):
        tail_fit(p, (5.0, 7.0))


def test_normalize_half(kpp1):
    assert evaluate(kpp1, 0.0) == pytest.approx(0.5, abs=1e-12)
    again = normalize_half(kpp1)
    assert np.max(np.abs(again.s - kpp1.s)) < 1e-12
    upper = WaveProfile(c=2.0, s=np.arange(5.0), values=np.linspace(1.0, 0.6, 5), fprime0=1.0)
    with pytest.raises(NotNormalizable):
        normalize_half(upper)


def test_evaluate_limits(kpp1):
    assert evaluate(kpp1, kpp1.s[0] - 100) == 1.0
    right = evaluate(kpp1, kpp1.s[-1] + 5)
    assert 0 <= right <= kpp1.values[-1]
    xs = np.linspace(kpp1.s[0] - 1, kpp1.s[-1] + 10, 4001)
    assert np.all(np.diff(evaluate(kpp1, xs)) <= 0)


@pytest.mark.parametrize("c", [2.0, 2.5])
def test_translation_family(c):
    # different seed anchors give the same curve once both are re-anchored at 1/2
    f = logistic(1.0)
    a = normalize_half(solve_profile(f, c, seed_eps=1e-6))
    b = normalize_half(solve_profile(f, c, seed_eps=1e-5))
    grid = np.linspace(-15, 25, 4001)
    assert np.max(np.abs(evaluate(a, grid) - evaluate(b, grid))) < 10 * 1e-8


def test_speed_ordering():
    f = logistic(1.0)
    rates = [tail_fit(normalize_half(solve_profile(f, c)))[0] for c in (2.5, 3.0, 4.0)]
    assert rates[0] > rates[1] > rates[2]
    np.testing.assert_allclose(rates, [decay_rates(c, 1.0)[0] for c in (2.5, 3.0, 4.0)], rtol=2e-3)


def test_span_restriction():
    p = solve_profile(logistic(1.0), 3.0, span=(-10.0, 60.0))
    assert p.normalized and p.s[0] >= -10.0 and p.s[-1] <= 60.0
    with pytest.raises(IllConditionedFit):
        solve_profile(logistic(1.0), 3.0, span=(-10.0, 5.0))


def test_non_h2_reaction_still_solves():
    # u(1-u)(1+8u) is not of KPP type with H2, but c above its pushed speed works
    p = solve_profile(polynomial([1.0, 8.0]), 5.0)
    assert np.all(np.diff(p.values) < 0)


def test_minimal_profile_runtime():
    t0 = time.perf_counter()
    minimal_profile(logistic(1.0))
    assert time.perf_counter() - t0 < 1.0
