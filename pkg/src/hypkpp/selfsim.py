"""Moving and self-similar frames for the front, and the half-line
Fokker-Planck problem whose steady state (the dipole) governs the leading
edge.

Chain of variables, with ``t`` the frame time::

    R(t)        = c* t - k log t + rho0
    u_hat(r, t) = u(r + R(t), t - 1)
    v           = exp(lambda0 r) u_hat
    eta         = r / sqrt(t),   tau = log t
    w(eta, tau) = exp(-tau / 2) v

To leading order ``w`` solves ``w_tau = w_ee + (eta/2) w_e + w`` on
``eta > 0`` with ``w(0) = 0``.  Substituting ``w = exp(-eta^2/8) omega``
turns this into ``omega_tau = -M omega`` with the self-adjoint
``M omega = -omega'' + (eta^2/16 - 3/4) omega``, whose Dirichlet spectrum on
the half line is ``0, 1, 2, ...``; the zero mode is the dipole
``phi0 = eta exp(-eta^2/4)``.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.linalg import lapack

from .errors import CoverageError, InvalidParameter, InvalidTime, OverflowGuard, SolverFailure
from .evolve import Field, Grid1D
from .reaction import ReactionFn, speeds

SQRT_PI = math.sqrt(math.pi)
#: ``int_0^inf eta * phi0(eta) d eta``
DIPOLE_NORM = 2.0 * SQRT_PI
_LOG_MAX = 700.0


@dataclass(frozen=True)
class FrameParams:
    c_star: float
    k: float
    rho0: float = 0.0

    @classmethod
    def from_reaction(cls, f: ReactionFn | float, d: int, rho0: float = 0.0) -> "FrameParams":
        sp = speeds(f, d)
        return cls(sp.c_star, 3.0 / sp.c0, rho0)

    def R(self, t: float) -> float:
        return R_of_t(self, t)


def R_of_t(frame: FrameParams, t: float) -> float:
    if not t >= 1.0:
        raise InvalidTime(f"the frame is defined for t >= 1, got {t!r}")
    return frame.c_star * t - frame.k * math.log(t) + frame.rho0


@dataclass(frozen=True, eq=False)
class SelfSimField:
    eta: np.ndarray
    values: np.ndarray
    tau: float = 0.0

    @property
    def deta(self) -> float:
        return float(self.eta[1] - self.eta[0])

    @classmethod
    def uniform(cls, values_fn, eta_max: float = 12.0, deta: float = 0.01, tau: float = 0.0):
        n = int(round(eta_max / deta)) + 1
        eta = np.linspace(0.0, eta_max, n)
        return cls(eta, np.asarray(values_fn(eta), dtype=float), tau)


def dipole(eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    return eta * np.exp(-eta * eta / 4.0)


# --------------------------------------------------------------------------
# frame changes


def to_moving_frame(
    field_at_t: Field,
    frame: FrameParams,
    varrho_min: float = -20.0,
    varrho_max: float | None = None,
    dvarrho: float | None = None,
) -> Field:
    """Resample a solution snapshot at simulation time ``s`` as
    ``u_hat(r, t) = u(r + R(t), t - 1)`` with frame time ``t = s + 1``.

    The returned :class:`Field` lives on a ``varrho`` grid and carries the
    frame time.  Positive values are interpolated monotonically in log space
    (exact for exponential tails); segments touching a zero stay zero.
    """
    t = field_at_t.time + 1.0
    if t < 2.0:
        raise InvalidTime(f"moving frame needs frame time t >= 2, got {t!r}")
    shift = R_of_t(frame, t)
    g = field_at_t.grid
    h = g.drho if dvarrho is None else dvarrho
    if varrho_max is None:
        varrho_max = g.rho_max - shift
    lo, hi = varrho_min + shift, varrho_max + shift
    tol = 1e-9 * max(1.0, abs(shift))
    if lo < g.rho_min - tol or hi > g.rho_max + tol or hi <= lo:
        raise CoverageError(
            f"frame range [{lo:.3f}, {hi:.3f}] leaves the simulated window "
            f"[{g.rho_min:.3f}, {g.rho_max:.3f}]"
        )
    out_grid = Grid1D.from_spacing(varrho_min, varrho_max, h)
    rho = np.clip(out_grid.nodes + shift, g.rho_min, g.rho_max)
    return Field(out_grid, resample(g.nodes, field_at_t.values, rho), t, field_at_t.step_index)


def resample(x: np.ndarray, u: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """Monotone resampling of non-negative data, log-space where positive."""
    pos = u > 0
    out = np.zeros_like(xq, dtype=float)
    if not pos.any():
        return out
    if pos.all():
        return np.clip(np.exp(PchipInterpolator(x, np.log(u))(xq)), 0.0, 1.0)
    # generic case: linear in u where a zero is involved, log-pchip elsewhere
    j = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, len(x) - 2)
    both = pos[j] & pos[j + 1]
    lin = np.interp(xq, x, u)
    out = lin
    if both.any():
        logu = np.log(np.where(pos, u, 1.0))
        ip = PchipInterpolator(x, logu)
        out = np.where(both, np.exp(ip(xq)), lin)
    return np.clip(out, 0.0, 1.0)


def to_selfsim(
    field_hat: Field, lambda0: float, eta_max: float = 12.0, deta: float = 0.01
) -> SelfSimField:
    """``w(eta, tau) = exp(-tau/2 + lambda0 eta e^{tau/2}) u_hat(eta e^{tau/2}, t)``.

    Computed as ``exp(log u_hat + exponent)`` so that tiny ``u_hat`` times a
    huge weight never overflows in an intermediate.
    """
    t = field_hat.time
    if not t >= 1.0:
        raise InvalidTime(f"self-similar frame needs t >= 1, got {t!r}")
    tau = math.log(t)
    n = int(round(eta_max / deta)) + 1
    eta = np.linspace(0.0, eta_max, n)
    rt = math.sqrt(t)
    r = eta * rt
    g = field_hat.grid
    if g.rho_min > 1e-12 or r[-1] > g.rho_max + 1e-9 * max(1.0, g.rho_max):
        raise CoverageError(
            f"u_hat covers [{g.rho_min:.3f}, {g.rho_max:.3f}], need [0, {r[-1]:.3f}]"
        )
    u = resample(g.nodes, field_hat.values, np.minimum(r, g.rho_max))
    out = np.zeros_like(eta)
    pos = u > 0
    expo = -tau / 2.0 + lambda0 * r[pos] + np.log(u[pos])
    if expo.size and expo.max() > _LOG_MAX:
        raise OverflowGuard(f"self-similar weight overflows (log w up to {expo.max():.1f})")
    out[pos] = np.exp(expo)
    return SelfSimField(eta, out, tau)


# --------------------------------------------------------------------------
# Fokker-Planck operators


def fp_operator_L(w: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """``L w = -w'' - (eta/2) w' - w`` at interior nodes (second-order FD)."""
    h = eta[1] - eta[0]
    d2 = (w[2:] - 2 * w[1:-1] + w[:-2]) / h**2
    d1 = (w[2:] - w[:-2]) / (2 * h)
    return -d2 - 0.5 * eta[1:-1] * d1 - w[1:-1]


def fp_operator_M(omega: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """``M omega = -omega'' + (eta^2/16 - 3/4) omega`` at interior nodes."""
    h = eta[1] - eta[0]
    d2 = (omega[2:] - 2 * omega[1:-1] + omega[:-2]) / h**2
    e = eta[1:-1]
    return -d2 + (e * e / 16.0 - 0.75) * omega[1:-1]


@functools.lru_cache(maxsize=16)
def _fp_system(n: int, h: float, eta0: float, dtau: float):
    """Fourth-order compact (Numerov) Crank-Nicolson matrices for the interior
    unknowns of ``omega_tau = omega'' - V omega``.

    With ``B = I + delta^2/12`` and ``A = delta^2/h^2`` the semi-discrete
    system is ``B omega_tau = -K omega``, ``K = B V - A``; the step solves
    ``(B + dtau/2 K) omega_new = (B - dtau/2 K) omega``.
    """
    eta = eta0 + h * np.arange(n)
    V = (eta * eta / 16.0 - 0.75)[1:-1]
    m = n - 2
    # K rows: sub, diag, super (acting on interior nodes, Dirichlet 0 ends)
    k_diag = 10.0 / 12.0 * V + 2.0 / h**2
    k_sub = 1.0 / 12.0 * V[:-1] - 1.0 / h**2  # coefficient of omega[j-1] in row j
    k_sup = 1.0 / 12.0 * V[1:] - 1.0 / h**2  # coefficient of omega[j+1] in row j
    b_diag = np.full(m, 10.0 / 12.0)
    b_off = np.full(m - 1, 1.0 / 12.0)
    c = 0.5 * dtau
    lhs = (b_off + c * k_sub, b_diag + c * k_diag, b_off + c * k_sup)
    rhs = (b_off - c * k_sub, b_diag - c * k_diag, b_off - c * k_sup)
    dl, d, du, du2, ipiv, info = lapack.dgttrf(*lhs)
    if info != 0:
        raise SolverFailure(f"Fokker-Planck factorisation failed (info={info})")
    return (dl, d, du, du2, ipiv), rhs, eta


def _check_grid(w: SelfSimField) -> None:
    eta = w.eta
    if eta[0] != 0.0:
        raise InvalidParameter("self-similar grid must start at eta = 0")
    if eta[-1] < 8.0:
        raise InvalidParameter(f"eta_max must be at least 8, got {eta[-1]:g}")
    if eta.size < 16 or not np.allclose(np.diff(eta), eta[1] - eta[0], rtol=1e-9, atol=0):
        raise InvalidParameter("self-similar grid must be uniform with >= 16 nodes")


def fp_evolve(w: SelfSimField, dtau: float, n_steps: int, every: int | None = None):
    """``n_steps`` Crank-Nicolson steps; returns the final field, plus the
    list of intermediate fields every ``every`` steps when requested."""
    if not dtau > 0:
        raise InvalidParameter("dtau must be positive")
    _check_grid(w)
    eta = w.eta
    n, h = eta.size, float(eta[1] - eta[0])
    lu, (rl, rd, ru), _ = _fp_system(n, h, 0.0, float(dtau))
    weight = np.exp(eta[1:-1] ** 2 / 8.0)
    om = w.values[1:-1] * weight
    tau = w.tau
    hist = []
    for i in range(1, n_steps + 1):
        rhs = rd * om
        rhs[1:] += rl * om[:-1]
        rhs[:-1] += ru * om[1:]
        om, info = lapack.dgttrs(*lu, rhs)
        if info != 0 or not np.all(np.isfinite(om)):
            raise SolverFailure("Fokker-Planck solve failed")
        if every and i % every == 0:
            hist.append(_assemble(eta, om / weight, w.tau + i * dtau))
    out = _assemble(eta, om / weight, w.tau + n_steps * dtau)
    return (out, hist) if every else out


def _assemble(eta, interior, tau) -> SelfSimField:
    vals = np.zeros_like(eta)
    vals[1:-1] = interior
    return SelfSimField(eta, vals, tau)


def fp_step(w: SelfSimField, dtau: float) -> SelfSimField:
    """One Crank-Nicolson step of ``w_tau = w_ee + (eta/2) w_e + w`` with
    ``w = 0`` at both ends of the grid."""
    return fp_evolve(w, dtau, 1)


# --------------------------------------------------------------------------
# dipole diagnostics


class Moment(float):
    """A float carrying a ``truncated`` flag."""

    truncated: bool

    def __new__(cls, value: float, truncated: bool = False):
        obj = super().__new__(cls, value)
        obj.truncated = truncated
        return obj


def dipole_moment(w: SelfSimField, tail_tol: float = 1e-12) -> Moment:
    """Trapezoidal ``int eta w d eta``; flags ``truncated`` (with a warning)
    if ``|w|`` at the right end exceeds ``tail_tol``."""
    val = float(trapezoid(w.eta * w.values, w.eta))
    edge = float(np.abs(w.values[-5:]).max())
    truncated = edge > tail_tol
    if truncated:
        warnings.warn(f"dipole moment truncated: |w| = {edge:.2e} at eta_max", stacklevel=2)
    return Moment(val, truncated)


def dipole_amplitude(w: SelfSimField) -> float:
    """Multiple ``alpha`` of ``phi0`` with the same first moment."""
    return float(dipole_moment(w)) / DIPOLE_NORM


def dipole_distance(w: SelfSimField, alpha: float) -> float:
    eta = w.eta
    return float(np.max(np.exp(eta * eta / 16.0) * np.abs(w.values - alpha * dipole(eta))))


def beta_from_alpha(alpha: float, lambda0: float) -> tuple[float, float]:
    """Both sign conventions ``(+log(alpha)/lambda0, -log(alpha)/lambda0)``."""
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive, got {alpha!r}")
    b = math.log(alpha) / lambda0
    return b, -b


def matched_beta(alpha: float, tail_amp: float, frame: FrameParams, lambda0: float) -> float:
    """Front shift predicted by a dipole amplitude measured in the frame.

    In the diffusive zone ``u_hat ~ alpha r exp(-lambda0 r)``, while a front
    ``Phi(rho - c* s + k log s - beta)`` with tail ``A z exp(-lambda0 z)``
    gives ``u_hat ~ A r exp(-lambda0 (r + c* + rho0 - beta))`` at simulation
    time ``s = t - 1`` (for large ``t``).  Equating the two gives
    ``beta = c* + rho0 + log(alpha / A) / lambda0``.
    """
    plus, _ = beta_from_alpha(alpha / tail_amp, lambda0)
    return frame.c_star + frame.rho0 + plus


def scheme_frame(f: ReactionFn, d: int, drho: float, dt: float, rho0: float = 0.0,
                 scheme: str = "imex_cn") -> FrameParams:
    """Frame moving with the discrete scheme's own pulled-front speed, with
    the log coefficient ``3 / (2 lam_h)`` from its discrete decay rate."""
    from .evolve import discrete_speed

    c_h, lam_h = discrete_speed(f.fprime0, d, drho, dt, scheme)
    return FrameParams(c_h, 1.5 / lam_h, rho0)
