"""Front tracking and the estimators built on it: speed and log-correction
regression, traveling-wave convergence error, extinction-rate fitting and the
propagation/vanishing dichotomy."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AmbiguousBeta, CoverageError, IllConditionedFit, InvalidData, NoFront
from .evolve import (
    BC,
    Field,
    Grid1D,
    SolverConfig,
    init_from_datum,
    run,
    sup_norm,
)
from .geometry import SymmetryClass
from .reaction import ReactionFn
from .selfsim import FrameParams
from .waves import WaveProfile, evaluate


@dataclass(frozen=True, eq=False)
class FrontTrace:
    t: np.ndarray
    m: np.ndarray
    level: float = 0.5

    def __post_init__(self):
        if self.t.shape != self.m.shape:
            raise InvalidData("trace times and positions differ in length")
        if np.any(np.diff(self.t) <= 0):
            raise InvalidData("trace times must be strictly increasing")

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.m.tolist()))

    def __len__(self):
        return self.t.size


@dataclass(frozen=True)
class FrontFit:
    a_hat: float
    b_hat: float
    c_hat: float
    residual_rms: float
    window: tuple[float, float]
    n_samples: int


@dataclass(frozen=True)
class ExtinctionFit:
    alpha_hat: float
    gamma_hat: float
    log_c_hat: float
    window: tuple[float, float]


class Dichotomy(str, enum.Enum):
    PROPAGATION = "propagation"
    VANISHING = "vanishing"
    UNDECIDED = "undecided"


# --------------------------------------------------------------------------
# front position


def front_position(fld: Field, level: float = 0.5) -> float:
    """Rightmost downward crossing of ``level``, linearly interpolated."""
    u = fld.values
    hit = np.flatnonzero((u[:-1] >= level) & (u[1:] < level))
    if hit.size == 0:
        raise NoFront(f"no downward crossing of level {level:g} at t={fld.time:g}")
    j = int(hit[-1])
    r = fld.rho
    return float(r[j] + (u[j] - level) / (u[j] - u[j + 1]) * (r[j + 1] - r[j]))


def track_front(snapshots: Sequence[Field], level: float = 0.5) -> FrontTrace:
    if not 0 < level < 1:
        raise InvalidData(f"level must lie in (0, 1), got {level!r}")
    t = np.array([s.time for s in snapshots], dtype=float)
    m = np.array([front_position(s, level) for s in snapshots], dtype=float)
    return FrontTrace(t, m, level)


def _ols(X: np.ndarray, y: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    sv = np.linalg.svd(Xs, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise IllConditionedFit(f"{what}: design matrix is rank deficient (window too short)")
    coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    coef = coef / scale
    return coef, y - X @ coef


def fit_front(trace: FrontTrace, window: tuple[float, float], min_samples: int = 30) -> FrontFit:
    """OLS of ``m(t) = a t + b log t + c`` over ``window``."""
    lo, hi = window
    sel = (trace.t >= lo) & (trace.t <= hi)
    n = int(sel.sum())
    if n < min_samples:
        raise IllConditionedFit(f"{n} samples in window {window}, need {min_samples}")
    t = trace.t[sel]
    if t[0] <= 0:
        raise InvalidData("front fit needs positive times")
    X = np.column_stack([t, np.log(t), np.ones_like(t)])
    coef, res = _ols(X, trace.m[sel], "fit_front")
    rms = float(np.sqrt(np.mean(res**2)))
    return FrontFit(float(coef[0]), float(coef[1]), float(coef[2]), rms, (lo, hi), n)


# --------------------------------------------------------------------------
# comparison with the traveling wave


def _lambda0(profile: WaveProfile) -> float:
    return math.sqrt(profile.fprime0)


def _position(frame: FrameParams, t: float, beta: float) -> float:
    if not t >= 1.0:
        raise CoverageError(f"comparison needs t >= 1 (log t), got {t:g}")
    return frame.c_star * t - frame.k * math.log(t) + beta


def _sup_error(fld: Field, profile: WaveProfile, pos: float, check: bool = True) -> float:
    rho = fld.rho
    keep = rho >= 0
    if not keep.any():
        raise CoverageError("snapshot has no nodes with rho >= 0")
    g = fld.grid
    if check:
        # the part of rho >= 0 outside the window must be where Phi is 1 or 0
        left = max(g.rho_min, 0.0)
        if left > 0 and 1.0 - evaluate(profile, left - pos) > 1e-6:
            raise CoverageError(f"front at {pos:.2f} too close to the window's left edge {left:.2f}")
        if evaluate(profile, g.rho_max - pos) > 1e-6:
            raise CoverageError(f"front at {pos:.2f} too close to the window's right edge")
    diff = np.abs(fld.values[keep] - evaluate(profile, rho[keep] - pos))
    return float(diff.max())


def convergence_error(
    snapshots: Sequence[Field], profile: WaveProfile, frame: FrameParams, beta: float
) -> list[tuple[float, float]]:
    """``sup_{rho >= 0} |u - Phi(rho - (c* t - k log t + beta))|`` per
    snapshot (the frame's ``rho0`` is not used; ``beta`` is the offset)."""
    if not profile.normalized:
        raise InvalidData("profile must be normalized (Phi(0) = 1/2)")
    return [(s.time, _sup_error(s, profile, _position(frame, s.time, beta))) for s in snapshots]


def estimate_beta(
    snapshots: Sequence[Field],
    profile: WaveProfile,
    frame: FrameParams,
    n_scan: int = 81,
    tol: float = 1e-9,
) -> float:
    """Offset minimising the sup error at the latest snapshot.

    A coarse scan over a bracket of width ``10 / lambda0`` centred on the
    offset implied by the half-level position checks unimodality; the
    minimum is then refined by golden-section search.
    """
    if not profile.normalized:
        raise InvalidData("profile must be normalized (Phi(0) = 1/2)")
    last = snapshots[-1]
    t = last.time
    base = front_position(last) - _position(frame, t, 0.0)
    half = 5.0 / _lambda0(profile)

    def obj(b):
        return _sup_error(last, profile, _position(frame, t, b), check=False)

    grid = np.linspace(base - half, base + half, n_scan)
    vals = np.array([obj(b) for b in grid])
    i = int(np.argmin(vals))
    # unimodality: scan values must fall to the minimum and rise after it
    # (small wiggles at the interpolation-noise level are tolerated)
    noise = 1e-6 + 1e-3 * vals[i]
    if np.any(np.diff(vals[: i + 1]) > noise) or np.any(np.diff(vals[i:]) < -noise):
        raise AmbiguousBeta("sup-error objective is not unimodal over the beta bracket")
    if i == 0 or i == n_scan - 1:
        raise AmbiguousBeta("sup-error minimum sits on the edge of the beta bracket")
    res = minimize_scalar(
        obj, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=tol
    )
    return float(res.x)


# --------------------------------------------------------------------------
# extinction and dichotomy


def fit_extinction(sup_norms: Sequence[tuple[float, float]], window: tuple[float, float]) -> ExtinctionFit:
    """Least squares of ``log ||u|| = alpha t + gamma log t + c``."""
    arr = np.asarray(sup_norms, dtype=float).reshape(-1, 2)
    lo, hi = window
    sel = (arr[:, 0] >= lo) & (arr[:, 0] <= hi)
    t, v = arr[sel, 0], arr[sel, 1]
    if t.size < 3:
        raise InvalidData(f"only {t.size} samples in window {window}")
    if np.any(v <= 0) or np.any(t <= 0):
        raise InvalidData("extinction fit needs positive times and sup-norms")
    X = np.column_stack([t, np.log(t), np.ones_like(t)])
    coef, _ = _ols(X, np.log(v), "fit_extinction")
    return ExtinctionFit(float(coef[0]), float(coef[1]), float(coef[2]), (lo, hi))


def _default_grid(kind: SymmetryClass, drho: float) -> tuple[Grid1D, BC]:
    if kind is SymmetryClass.ELLIPTIC:
        return Grid1D.from_spacing(0.0, 80.0, drho), BC.NEUMANN0
    return Grid1D.from_spacing(-80.0, 80.0, drho), BC.DIRICHLET0


def classify_dichotomy(
    f: ReactionFn,
    kind,
    d: int,
    datum: Callable | np.ndarray,
    horizon: float = 200.0,
    probe: tuple[float, float] = (0.0, 5.0),
    drho: float = 0.1,
    dt: float = 0.01,
    grid: Grid1D | None = None,
    check_every: float = 1.0,
) -> Dichotomy:
    """Run until ``min u`` on ``probe`` exceeds 0.99 (propagation), ``sup u``
    drops below 0.01 (vanishing) or ``horizon`` passes (undecided)."""
    kind = SymmetryClass.parse(kind)
    if grid is None:
        grid, left = _default_grid(kind, drho)
    else:
        left = BC.NEUMANN0 if kind is SymmetryClass.ELLIPTIC and grid.rho_min == 0 else BC.DIRICHLET0
    cfg = SolverConfig(dt=dt, left_bc=left, right_bc=BC.DIRICHLET0)
    fld = init_from_datum(kind, grid, datum)
    rho = grid.nodes
    in_probe = (rho >= probe[0]) & (rho <= probe[1])
    if not in_probe.any():
        raise InvalidData("probe set contains no grid nodes")
    t = 0.0
    while True:
        if fld.values[in_probe].min() > 0.99:
            return Dichotomy.PROPAGATION
        if sup_norm(fld) < 0.01:
            return Dichotomy.VANISHING
        if t >= horizon - 1e-9:
            return Dichotomy.UNDECIDED
        t_next = min(t + check_every, horizon)
        fld = run(f, kind, d, fld, cfg, t_next, [t_next]).snapshots[-1]
        t = fld.time


def superdiffusive_check(
    snapshots: Sequence[Field], frame: FrameParams, eps: float, lambda0: float | None = None
) -> bool:
    """Is ``sup u`` over ``rho > R(t) + (1/c0 + eps) log t`` decreasing over
    the last decade of snapshot times and below 0.01 at the end?

    ``c0`` is recovered from the frame as ``3 / k`` unless ``lambda0`` is
    given.  ``R(t)`` uses the simulation time.
    """
    c0 = 2.0 * lambda0 if lambda0 is not None else 3.0 / frame.k
    t_last = snapshots[-1].time
    sups = []
    for s in snapshots:
        if s.time < max(1.0, t_last / 10.0):
            continue
        edge = frame.c_star * s.time - frame.k * math.log(s.time) + frame.rho0
        edge += (1.0 / c0 + eps) * math.log(s.time)
        if edge > s.grid.rho_max:
            raise CoverageError(f"superdiffusive region starts beyond the window at t={s.time:g}")
        if edge < s.grid.rho_min:
            raise CoverageError(f"superdiffusive region starts behind the window at t={s.time:g}")
        sel = s.rho > edge
        sups.append(float(s.values[sel].max()) if sel.any() else 0.0)
    if len(sups) < 2:
        raise InvalidData("need at least two snapshots in the last decade")
    s = np.array(sups)
    return bool(np.all(np.diff(s) <= 0.0) and s[-1] < 0.01)
