"""Hyperbolic-space ingredients for the reduced one-dimensional problems.

Each cohomogeneity-one isometry class reduces the Laplace-Beltrami operator
on H^d acting on invariant functions to

    u_rr + (d - 1) h1(r) u_r

with ``h1 = coth`` (elliptic, r > 0), ``tanh`` (hyperbolic) or ``1``
(parabolic).  The module also carries the d = 3 heat kernel and the Davies
two-sided envelope used for the extinction estimates.
"""
from __future__ import annotations

import enum
import math

import numpy as np
from scipy import integrate

from .errors import InvalidDimension, InvalidTime, OutOfDomain

_SERIES_R = 1e-4
_LAURENT_RHO = 1e-6


class SymmetryClass(str, enum.Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"

    @property
    def domain_I(self) -> tuple[float, float]:
        if self is SymmetryClass.ELLIPTIC:
            return (0.0, math.inf)
        return (-math.inf, math.inf)

    @classmethod
    def parse(cls, value) -> "SymmetryClass":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise OutOfDomain(
                f"unknown symmetry class {value!r}; expected one of "
                f"{[k.value for k in cls]}"
            ) from None


def _check_domain(kind: SymmetryClass, rho: np.ndarray) -> None:
    if kind is SymmetryClass.ELLIPTIC and np.any(rho <= 0):
        raise OutOfDomain("elliptic coordinate must be positive")


def drift_h1(kind, rho):
    """Drift coefficient ``h1`` of the reduced Laplacian (mean curvature of
    the orbit through ``rho``)."""
    kind = SymmetryClass.parse(kind)
    r = np.asarray(rho, dtype=float)
    _check_domain(kind, r)
    if kind is SymmetryClass.PARABOLIC:
        out = np.ones_like(r)
    elif kind is SymmetryClass.HYPERBOLIC:
        out = np.tanh(r)
    else:
        with np.errstate(divide="ignore"):
            out = np.where(r < _LAURENT_RHO, 1.0 / r + r / 3.0, 1.0 / np.tanh(r))
    return out if out.ndim else float(out)


def drift_gap(kind, rho):
    """``|h1(rho) - 1|`` in closed form."""
    kind = SymmetryClass.parse(kind)
    r = np.asarray(rho, dtype=float)
    _check_domain(kind, r)
    if kind is SymmetryClass.PARABOLIC:
        out = np.zeros_like(r)
    elif kind is SymmetryClass.HYPERBOLIC:
        with np.errstate(over="ignore"):
            out = 2.0 / (np.exp(2.0 * r) + 1.0)
    else:
        with np.errstate(over="ignore"):
            out = 2.0 / np.expm1(2.0 * r)
    return out if out.ndim else float(out)


def signed_drift_gap(kind, rho):
    """``h1(rho) - 1``: positive for elliptic, negative for hyperbolic."""
    kind = SymmetryClass.parse(kind)
    g = drift_gap(kind, rho)
    return -g if kind is SymmetryClass.HYPERBOLIC else g


def curvature_H(kind, d: int, varrho, t: float, frame):
    """Curvature error factor ``(d - 1) (h1(varrho + R(t)) - 1)`` in the
    moving frame; ``frame`` is anything with an ``R(t)`` method."""
    _check_dim(d)
    kind = SymmetryClass.parse(kind)
    rho = np.asarray(varrho, dtype=float) + frame.R(t)
    out = (d - 1) * np.asarray(signed_drift_gap(kind, rho))
    return out if out.ndim else float(out)


def _check_dim(d) -> None:
    if int(d) != d or d < 2:
        raise InvalidDimension(f"dimension must be an integer >= 2, got {d!r}")


def _check_time(t) -> None:
    if not t > 0:
        raise InvalidTime(f"time must be positive, got {t!r}")


def _r_over_sinh(r: np.ndarray) -> np.ndarray:
    small = r < _SERIES_R
    rs = np.where(small, 1.0, r)
    with np.errstate(over="ignore"):
        big = 2.0 * rs * np.exp(-rs) / -np.expm1(-2.0 * rs)
    return np.where(small, 1.0 - r * r / 6.0, big)


def _log_r_over_sinh(r: np.ndarray) -> np.ndarray:
    small = r < _SERIES_R
    rs = np.where(small, 1.0, r)
    big = np.log(2.0 * rs) - rs - np.log(-np.expm1(-2.0 * rs))
    return np.where(small, -r * r / 6.0, big)


def log_heat_kernel_P3(r, t: float):
    """``log P_t(r)``; finite wherever ``P_t`` itself would underflow."""
    _check_time(t)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise OutOfDomain("distance must be non-negative")
    out = -1.5 * math.log(4 * math.pi * t) + _log_r_over_sinh(r) - t - r * r / (4 * t)
    return out if out.ndim else float(out)


def heat_kernel_P3(r, t: float):
    """Heat kernel of H^3 as a function of geodesic distance ``r``:

        P_t(r) = (4 pi t)^(-3/2) (r / sinh r) exp(-t - r^2 / (4t)).
    """
    out = np.exp(log_heat_kernel_P3(r, t))
    return out if np.ndim(out) else float(out)


def log_heat_kernel_bound_h(d: int, r, t: float):
    _check_dim(d)
    _check_time(t)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise OutOfDomain("distance must be non-negative")
    lam1 = (d - 1) ** 2 / 4.0
    out = (
        np.log1p(r)
        - (d / 2) * math.log(4 * math.pi * t)
        + ((d - 3) / 2) * np.log(1 + r + t)
        - lam1 * t
        - (d - 1) * r / 2
        - r * r / (4 * t)
    )
    return out if out.ndim else float(out)


def heat_kernel_bound_h(d: int, r, t: float):
    """Davies envelope ``h_t(r)`` bounding the heat kernel of H^d above and
    below up to a dimensional constant."""
    out = np.exp(log_heat_kernel_bound_h(d, r, t))
    return out if np.ndim(out) else float(out)


def kernel_ratio(r, t: float):
    """``P_t / h_t`` for d = 3, evaluated in log space."""
    out = np.exp(log_heat_kernel_P3(r, t) - log_heat_kernel_bound_h(3, r, t))
    return out if np.ndim(out) else float(out)


def heat_kernel_bound_h_shifted(d: int, r, t: float):
    """Same envelope written as a Gaussian centred at ``-(d-1) t`` times an
    algebraic factor."""
    _check_dim(d)
    _check_time(t)
    r = np.asarray(r, dtype=float)
    H = (1 + r + t) ** ((d - 3) / 2) * (1 + r) / t ** (d / 2)
    out = (4 * math.pi) ** (-d / 2) * np.exp(-((r + (d - 1) * t) ** 2) / (4 * t)) * H
    return out if out.ndim else float(out)


def kernel_ratio_check(t: float, r_max: float = 20.0, n: int = 1000) -> tuple[float, float]:
    """Min and max of ``P_t / h_t`` (d = 3) over ``n`` points of ``[0, r_max]``."""
    _check_time(t)
    r = np.linspace(0.0, r_max, n)
    ratio = kernel_ratio(r, t)
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
        raise OutOfDomain("kernel ratio not finite/positive on the requested grid")
    return float(ratio.min()), float(ratio.max())


def p3_mass(t: float, epsrel: float = 1e-12) -> float:
    """``int_0^inf P_t(r) 4 pi sinh(r)^2 dr`` by adaptive Gauss-Kronrod.

    The integrand is ``r sinh(r) exp(-t - r^2/4t)`` up to constants, a bump
    centred at ``r = 2t`` of width ``sqrt(2t)``; the cut-off sits 12 widths
    past the peak where the remaining tail is below 1e-30 of the total.
    """
    _check_time(t)
    pref = 4 * math.pi * (4 * math.pi * t) ** -1.5

    def integrand(r):
        # r sinh r e^{-t - r^2/4t} without overflow
        a = -((r - 2 * t) ** 2) / (4 * t)
        b = -((r + 2 * t) ** 2) / (4 * t)
        return pref * r * 0.5 * (math.exp(a) - math.exp(b))

    width = math.sqrt(2 * t)
    r_cut = 2 * t + 12 * width + 10
    breaks = sorted({max(2 * t - 3 * width, 0.0), 2 * t, 2 * t + 3 * width})
    breaks = [b for b in breaks if 0 < b < r_cut]
    val, _ = integrate.quad(
        integrand, 0.0, r_cut, points=breaks or None, epsabs=0.0, epsrel=epsrel, limit=200
    )
    return float(val)


def radial_heat_residual(r: float, t: float, step: float = 1e-3) -> float:
    """Relative residual of ``P_t - P_rr - 2 coth(r) P_r`` for the H^3 kernel,
    by fourth-order centred finite differences."""
    if not r > 2 * step:
        raise OutOfDomain("residual check needs r > 2*step")
    P = heat_kernel_P3
    hr = step
    ht = step * min(1.0, t / 4)
    w1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    w2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    k = np.arange(-2, 3)
    pr = P(r + k * hr, t)
    p_t = w1 @ np.array([P(r, t + j * ht) for j in k]) / ht
    p_r = w1 @ pr / hr
    p_rr = w2 @ pr / hr**2
    drift = 2.0 / math.tanh(r) * p_r
    res = p_t - p_rr - drift
    return float(abs(res) / max(abs(p_t), abs(p_rr), abs(drift)))
