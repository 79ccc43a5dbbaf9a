"""KPP reaction terms and the spectral constants derived from them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import InvalidDimension, InvalidParameter, NotKPP

ENDPOINT_TOL = 1e-10
HYPOTHESIS_TOL = 1e-12


def _extend_by_zero(g: Callable[[np.ndarray], np.ndarray]) -> Callable:
    # Solutions live in [0, 1]; scheme overshoot outside must not react.
    def wrapped(u):
        u = np.asarray(u, dtype=float)
        inside = (u >= 0.0) & (u <= 1.0)
        out = np.where(inside, g(np.clip(u, 0.0, 1.0)), 0.0)
        return out if out.ndim else float(out)

    return wrapped


@dataclass(frozen=True)
class ReactionFn:
    """A reaction term ``f`` on ``[0, 1]`` with its derivative.

    ``eval`` and ``deriv`` accept scalars or arrays and return 0 outside
    ``[0, 1]``.  Instances are immutable and may be shared between runs.
    """

    name: str
    fprime0: float
    _f: Callable = field(repr=False)
    _df: Callable = field(repr=False)
    params: tuple = ()

    def eval(self, u):
        return _extend_by_zero(self._f)(u)

    def deriv(self, u):
        return _extend_by_zero(self._df)(u)

    __call__ = eval

    def scalar(self, u: float) -> float:
        """Fast path for scalar arguments (ODE right-hand sides)."""
        if u < 0.0 or u > 1.0:
            return 0.0
        return float(self._f(u))

    @property
    def fprime1(self) -> float:
        return float(self._df(np.asarray(1.0)))


def logistic(a: float = 1.0) -> ReactionFn:
    """``f(u) = a u (1 - u)``."""
    if not (a > 0 and math.isfinite(a)):
        raise InvalidParameter(f"logistic rate must be positive, got a={a!r}")
    a = float(a)
    return ReactionFn(
        name="logistic",
        fprime0=a,
        _f=lambda u: a * u * (1.0 - u),
        _df=lambda u: a * (1.0 - 2.0 * u),
        params=(("a", a),),
    )


def zero_reaction() -> ReactionFn:
    """``f = 0``; useful for pure advection-diffusion checks, not a KPP term."""
    return ReactionFn(
        name="zero",
        fprime0=0.0,
        _f=lambda u: np.zeros_like(u, dtype=float),
        _df=lambda u: np.zeros_like(u, dtype=float),
    )


def polynomial(coeffs) -> ReactionFn:
    """``f(u) = u (1 - u) p(u)`` with ``p`` given by ascending coefficients.

    ``polynomial([1, 8])`` is ``u(1-u)(1+8u)``, which satisfies the KPP
    endpoint conditions but not ``f(u) <= f'(0) u``.
    """
    p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    q = np.polynomial.Polynomial([0.0, 1.0, -1.0]) * p
    dq = q.deriv()
    return ReactionFn(
        name="polynomial",
        fprime0=float(dq(0.0)),
        _f=lambda u: q(u),
        _df=lambda u: dq(u),
        params=(("coeffs", tuple(float(c) for c in coeffs)),),
    )


BUILTINS = {
    "logistic": logistic,
    "zero": zero_reaction,
    "polynomial": polynomial,
}


def from_spec(name: str, **params) -> ReactionFn:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise InvalidParameter(
            f"unknown reaction {name!r}; choose from {sorted(BUILTINS)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for reaction {name!r}: {exc}") from None


@dataclass(frozen=True)
class KppCertificate:
    satisfies_H1: bool
    satisfies_H2: bool
    satisfies_H2star: bool
    sample_count: int
    max_violation: float


def validate_kpp(f: ReactionFn, n_samples: int = 1000) -> KppCertificate:
    """Sampled check of the KPP hypotheses on a uniform grid of ``[0, 1]``.

    Raises :class:`NotKPP` when ``f(0)`` or ``f(1)`` is not zero.  The other
    hypotheses are reported in the certificate; ``max_violation`` is the
    largest of ``f(u) - f'(0) u`` and ``f'(u) - f'(0)`` over the samples.
    """
    if n_samples < 100:
        raise InvalidParameter("validate_kpp needs at least 100 samples")
    u = np.linspace(0.0, 1.0, n_samples)
    fu = np.asarray(f.eval(u), dtype=float)
    dfu = np.asarray(f.deriv(u), dtype=float)
    if abs(fu[0]) > ENDPOINT_TOL or abs(fu[-1]) > ENDPOINT_TOL:
        raise NotKPP(f"f(0)={fu[0]:.3g}, f(1)={fu[-1]:.3g}; both must vanish")
    fp0 = f.fprime0
    h1 = bool(np.all(fu[1:-1] > 0.0) and fp0 > 0.0 and dfu[-1] < 0.0)
    gap2 = fu - fp0 * u
    gap2star = dfu - fp0
    return KppCertificate(
        satisfies_H1=h1,
        satisfies_H2=bool(gap2.max() <= HYPOTHESIS_TOL),
        satisfies_H2star=bool(gap2star.max() <= HYPOTHESIS_TOL),
        sample_count=int(n_samples),
        max_violation=float(max(gap2.max(), gap2star.max())),
    )


class Speeds(NamedTuple):
    lambda0: float
    c0: float
    c_star: float
    lambda1: float


def speeds(f: ReactionFn | float, d: int) -> Speeds:
    """Decay rate, minimal speed, hyperbolic spreading speed and spectral gap.

    ``f`` may also be given directly as the value of ``f'(0)``.
    """
    if int(d) != d or d < 2:
        raise InvalidDimension(f"dimension must be an integer >= 2, got {d!r}")
    fp0 = f.fprime0 if isinstance(f, ReactionFn) else float(f)
    if not fp0 > 0:
        raise InvalidParameter(f"f'(0) must be positive, got {fp0!r}")
    lam0 = math.sqrt(fp0)
    c0 = 2.0 * lam0
    return Speeds(lam0, c0, c0 - (d - 1), (d - 1) ** 2 / 4.0)
