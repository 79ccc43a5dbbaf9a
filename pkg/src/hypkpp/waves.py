"""Traveling-wave profiles ``U'' + c U' + f(U) = 0`` with ``U(-inf) = 1`` and
``U(+inf) = 0``.

Profiles are obtained by shooting along the one-dimensional unstable manifold
of the saddle ``U = 1`` and integrating forward in ``s`` into the stable node
at ``U = 0``.  That direction is well conditioned: errors transverse to the
heteroclinic decay.  The opposite direction (from the tail towards ``U = 1``)
amplifies seed errors by ``exp(mu L)`` with ``L`` the length of the approach
to 1, which exhausts double precision long before ``1 - U`` reaches 1e-8.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, least_squares

from .errors import IllConditionedFit, NoMonotoneFront, NotNormalizable, SeedFailure
from .reaction import ReactionFn

MIN_EFOLDINGS = 5.0


@dataclass(frozen=True, eq=False)
class WaveProfile:
    """Sampled traveling-wave profile on a uniform grid ``s``."""

    c: float
    s: np.ndarray
    values: np.ndarray
    fprime0: float
    normalized: bool = False
    tail_lambda: float = math.nan
    tail_kappa: float = math.nan
    tail_amp: float = math.nan

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def is_minimal(self) -> bool:
        return _is_minimal(self.c, self.fprime0, 1e-8)

    def __call__(self, s):
        return evaluate(self, s)


def _is_minimal(c: float, fprime0: float, tol: float) -> bool:
    return c * c - 4.0 * fprime0 <= max(tol * tol, 1e-14 * c * c)


def decay_rates(c: float, fprime0: float) -> tuple[float, float]:
    """Roots of ``lam^2 - c lam + f'(0) = 0`` (slow, fast)."""
    disc = max(c * c - 4.0 * fprime0, 0.0)
    return (c - math.sqrt(disc)) / 2.0, (c + math.sqrt(disc)) / 2.0


def solve_profile(
    f: ReactionFn,
    c: float,
    span: tuple[float, float] | None = None,
    tol: float = 1e-8,
    ds: float = 0.01,
    u_floor: float = 1e-14,
    seed_eps: float | None = None,
) -> WaveProfile:
    """Monotone front of speed ``c`` for the reaction ``f``.

    The seed is ``U = 1 - eps``, ``U' = -eps r`` at ``s = 0`` with ``r`` the
    positive root of ``r^2 + c r + f'(1) = 0``.  Left of the seed the profile
    is the linearised approach ``1 - eps exp(r s)``, extended until
    ``1 - U = tol``; right of it the ODE is integrated until ``U`` drops below
    ``u_floor``.  Seeding much closer to 1 than 1e-6 costs accuracy, since
    ``f(1 - eps)`` then loses most of its significant digits.  The result is
    not normalized unless ``span`` is given.
    """
    fp0 = f.fprime0
    disc = c * c - 4.0 * fp0
    if disc < -tol * tol:
        raise NoMonotoneFront(
            f"no monotone front: c={c:g} is below the minimal speed {2 * math.sqrt(fp0):g} "
            "(the linearisation at 0 has complex roots and U oscillates)"
        )
    fp1 = f.fprime1
    if not fp1 < 0:
        raise SeedFailure(f"f'(1)={fp1:g} must be negative for a saddle at U=1")
    eps = max(tol, 1e-6) if seed_eps is None else seed_eps
    r_plus = (-c + math.sqrt(c * c - 4.0 * fp1)) / 2.0
    lam_slow, _ = decay_rates(c, fp0)
    s_cap = math.log(1.0 / eps) / r_plus + 10.0 * math.log(1.0 / u_floor) / lam_slow + 50.0

    fs = f.scalar

    def rhs(_, y):
        return (y[1], -c * y[1] - fs(y[0]))

    def reached_floor(_, y):
        return y[0] - u_floor

    def below_zero(_, y):
        return y[0] + tol

    def above_one(_, y):
        return y[0] - (1.0 + tol)

    for ev in (reached_floor, below_zero, above_one):
        ev.terminal = True
    below_zero.direction = -1
    above_one.direction = 1

    rtol = max(tol * 1e-4, 1e-13)
    sol = solve_ivp(
        rhs,
        (0.0, s_cap),
        (1.0 - eps, -eps * r_plus),
        method="DOP853",
        rtol=rtol,
        atol=u_floor * 1e-12,
        dense_output=True,
        events=(reached_floor, below_zero, above_one),
    )
    if not sol.success:
        raise SeedFailure(f"profile integration failed: {sol.message}")
    if sol.t_events[1].size:
        raise SeedFailure("profile dropped below 0: no monotone front at this speed")
    if sol.t_events[2].size:
        raise SeedFailure("profile overshot 1")
    if not sol.t_events[0].size:
        raise SeedFailure(f"profile did not decay to {u_floor:g} within s={s_cap:g}")
    s_end = float(sol.t_events[0][0])
    s_left = min(0.0, math.log(tol / eps) / r_plus)
    s = np.arange(0.0, s_end, ds)
    s = np.concatenate([-ds * np.arange(int(-s_left / ds) + 1, 0, -1), s])
    values = np.empty_like(s)
    pre = s < 0
    values[pre] = 1.0 - eps * np.exp(r_plus * s[pre])
    values[~pre] = sol.sol(s[~pre])[0]
    if np.any(np.diff(values) >= 0):
        raise SeedFailure("integrated profile is not strictly decreasing")
    prof = WaveProfile(c=float(c), s=s, values=values, fprime0=fp0)
    if span is not None:
        prof = _restrict(normalize_half(prof), span)
    return prof


def _restrict(p: WaveProfile, span) -> WaveProfile:
    lo, hi = span
    lam = decay_rates(p.c, p.fprime0)[0]
    if hi * lam < 10.0:
        raise IllConditionedFit(f"span right end {hi:g} covers fewer than 10 e-foldings")
    keep = (p.s >= lo) & (p.s <= hi)
    return replace(p, s=p.s[keep], values=p.values[keep])


def _interp(p: WaveProfile) -> PchipInterpolator:
    # pchip wants increasing y or x; x is increasing, values decreasing: fine
    return PchipInterpolator(p.s, p.values, extrapolate=False)


def normalize_half(p: WaveProfile) -> WaveProfile:
    """Translate ``p`` so that its interpolated half level sits at ``s = 0``."""
    v = p.values
    if not (v.max() > 0.5 > v.min()):
        raise NotNormalizable("profile never crosses 1/2")
    j = int(np.argmax(v < 0.5))  # first node below 1/2
    if v[j - 1] == 0.5:
        s_half = float(p.s[j - 1])
    else:
        ip = _interp(p)
        s_half = brentq(lambda x: float(ip(x)) - 0.5, p.s[j - 1], p.s[j], xtol=1e-15, rtol=1e-15)
    return replace(p, s=p.s - s_half, normalized=True)


def _default_window(p: WaveProfile) -> tuple[float, float]:
    inside = (p.values <= 1e-3) & (p.values >= 1e-11)
    if not inside.any():
        raise IllConditionedFit("profile has no resolved tail in [1e-11, 1e-3]")
    return float(p.s[inside][0]), float(p.s[inside][-1])


def tail_fit(p: WaveProfile, fit_window: tuple[float, float] | None = None) -> tuple[float, float]:
    """Fit the leading-edge asymptotics of ``p``.

    At the minimal speed the model is ``A (s + kappa) exp(-lam s)``; the
    amplitude ``A`` is fitted jointly with ``(lam, kappa)`` because the
    half-level normalization leaves it determined by ``f``.  Above the
    minimal speed the model is ``A exp(-lam s)`` and ``kappa`` is NaN.
    Returns ``(lam, kappa)``; use :func:`with_tail` to keep ``A`` as well.
    """
    lam, kappa, _ = _tail_fit_full(p, fit_window)
    return lam, kappa


def _tail_fit_full(p: WaveProfile, fit_window=None) -> tuple[float, float, float]:
    lo, hi = fit_window if fit_window is not None else _default_window(p)
    m = (p.s >= lo) & (p.s <= hi)
    s, u = p.s[m], p.values[m]
    if s.size < 10 or np.any(u <= 0):
        raise IllConditionedFit("fit window holds too few positive samples")
    if math.log(u[0] / u[-1]) < MIN_EFOLDINGS:
        raise IllConditionedFit(
            f"fit window spans {math.log(u[0] / u[-1]):.2f} e-foldings (< {MIN_EFOLDINGS})"
        )
    y = np.log(u)
    slope, icpt = np.polyfit(s, y, 1)
    if not p.is_minimal:
        return float(-slope), math.nan, float(math.exp(icpt))

    def resid(x):
        lam, kap, loga = x
        return loga + np.log(s + kap) - lam * s - y

    kap_min = -s[0] + 1e-9
    x0 = (-slope, max(1.0, kap_min + 1.0), icpt)
    fit = least_squares(
        resid,
        x0,
        bounds=([0.0, kap_min, -np.inf], [np.inf, np.inf, np.inf]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=2000,
    )
    lam, kap, loga = fit.x
    return float(lam), float(kap), float(math.exp(loga))


def with_tail(p: WaveProfile, fit_window=None) -> WaveProfile:
    lam, kap, amp = _tail_fit_full(p, fit_window)
    return replace(p, tail_lambda=lam, tail_kappa=kap, tail_amp=amp)


def minimal_profile(f: ReactionFn, tol: float = 1e-8, ds: float = 0.01) -> WaveProfile:
    """Normalized minimal-speed profile with fitted tail, ready for
    :func:`evaluate`."""
    c0 = 2.0 * math.sqrt(f.fprime0)
    return with_tail(normalize_half(solve_profile(f, c0, tol=tol, ds=ds)))


def evaluate(p: WaveProfile, s):
    """Profile value at arbitrary ``s``.

    Monotone cubic interpolation on the grid, ``1`` to the left of it and the
    fitted tail (or, without a fit, exponential extrapolation of the last two
    nodes) to the right, clipped to ``[0, 1]``.
    """
    x = np.asarray(s, dtype=float)
    out = np.empty_like(x)
    left = x < p.s[0]
    right = x > p.s[-1]
    mid = ~(left | right)
    out[left] = 1.0
    if mid.any():
        out[mid] = _interp(p)(x[mid])
    if right.any():
        xr = x[right]
        if math.isfinite(p.tail_lambda):
            kap = p.tail_kappa if math.isfinite(p.tail_kappa) else None
            if kap is None:
                tail = p.tail_amp * np.exp(-p.tail_lambda * xr)
            else:
                tail = p.tail_amp * (xr + kap) * np.exp(-p.tail_lambda * xr)
        else:
            rate = math.log(p.values[-2] / p.values[-1]) / p.ds
            tail = p.values[-1] * np.exp(-rate * (xr - p.s[-1]))
        out[right] = np.clip(tail, 0.0, 1.0)
    np.clip(out, 0.0, 1.0, out=out)
    return out if out.ndim else float(out)


def ode_residual(p: WaveProfile, f: ReactionFn) -> np.ndarray:
    """``U'' + c U' + f(U)`` at interior nodes by five-point centred
    differences."""
    from numpy.lib.stride_tricks import sliding_window_view

    h = p.ds
    win = sliding_window_view(p.values, 5)
    d1 = win @ (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0) / h
    d2 = win @ (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0) / h**2
    return d2 + p.c * d1 + f.eval(p.values[2:-2])
