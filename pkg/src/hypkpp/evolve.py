"""Finite-difference integrator for the reduced problem

    u_t = u_rr + (d - 1) h1(r) u_r + f(u),    r in I,

with a moving computational window for long front runs.

The ``imex_cn`` scheme is a Strang splitting: half a reaction step (Heun),
one Crank-Nicolson step of the linear diffusion-drift operator (tridiagonal,
factored once with LAPACK ``gttrf``), and another half reaction step.  Both
halves are second order, so the composition is too.  The first
``cfg.rannacher`` steps replace the CN step with two backward-Euler half
steps, which damps the undamped high-frequency modes CN inherits from
discontinuous data.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import lapack

from .errors import ConfigError, InvalidDatum, InvalidParameter, OutOfDomain, SolverFailure
from .geometry import SymmetryClass, drift_h1
from .reaction import ReactionFn

log = logging.getLogger(__name__)

CLIP_EPS = 1e-12
# below this, values are flushed to 0: subnormal arithmetic is ~100x slower
# and nothing physical lives down there
FLUSH = 1e-280


class Scheme(str, enum.Enum):
    IMEX_CN = "imex_cn"
    EXPLICIT_EULER = "explicit_euler"


class BC(str, enum.Enum):
    NEUMANN0 = "neumann0"
    DIRICHLET0 = "dirichlet0"
    DIRICHLET1 = "dirichlet1"


@dataclass(frozen=True)
class Grid1D:
    rho_min: float
    rho_max: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise InvalidParameter(f"grid needs at least 16 points, got {self.n}")
        if not self.rho_max > self.rho_min:
            raise InvalidParameter("rho_max must exceed rho_min")

    @classmethod
    def from_spacing(cls, rho_min: float, rho_max: float, drho: float) -> "Grid1D":
        n = int(round((rho_max - rho_min) / drho)) + 1
        return cls(rho_min, rho_min + (n - 1) * drho, n)

    @property
    def drho(self) -> float:
        return (self.rho_max - self.rho_min) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.rho_min + self.drho * np.arange(self.n)

    def shifted(self, cells: int) -> "Grid1D":
        h = self.drho
        return Grid1D(self.rho_min + cells * h, self.rho_max + cells * h, self.n)


@dataclass(frozen=True, eq=False)
class Field:
    """Solution samples on a grid at a given time (absolute coordinates)."""

    grid: Grid1D
    values: np.ndarray
    time: float = 0.0
    step_index: int = 0

    @property
    def rho(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def support_right(self) -> float | None:
        """Largest node with a non-zero value, ``None`` for the zero field."""
        nz = np.flatnonzero(self.values > 0)
        return float(self.rho[nz[-1]]) if nz.size else None


@dataclass(frozen=True)
class MovingWindow:
    """Shift the grid right whenever ``u`` exceeds ``trigger_level`` closer
    than ``pad_right`` to the right edge.  Shifts are whole multiples of
    ``shift_chunk`` cells; the dropped left cells are assumed saturated at 1
    and the left boundary becomes ``left_bc_after_shift``."""

    trigger_level: float = 1e-8
    pad_right: float = 200.0
    shift_chunk: int = 100
    left_bc_after_shift: BC = BC.DIRICHLET1

    def check(self, lambda0: float) -> None:
        if self.pad_right < 20.0 / lambda0:
            raise ConfigError(
                f"pad_right={self.pad_right:g} must be at least 20/lambda0={20 / lambda0:g}"
            )
        if self.shift_chunk < 1:
            raise ConfigError("shift_chunk must be a positive number of cells")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    scheme: Scheme = Scheme.IMEX_CN
    left_bc: BC = BC.NEUMANN0
    right_bc: BC = BC.DIRICHLET0
    window: MovingWindow | None = None
    rannacher: int = 4

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "left_bc", BC(self.left_bc))
        object.__setattr__(self, "right_bc", BC(self.right_bc))
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if self.right_bc is BC.DIRICHLET1:
            raise ConfigError("right boundary supports dirichlet0 or neumann0")


# --------------------------------------------------------------------------
# initial data


def indicator(a: float, b: float) -> Callable:
    return lambda r: ((r >= a) & (r <= b)).astype(float)


def step_datum(b: float) -> Callable:
    """``1`` for ``r <= b``, ``0`` beyond."""
    return lambda r: (r <= b).astype(float)


def bump(center: float = 0.0, width: float = 1.0, height: float = 1.0, cutoff: float = 1e-16):
    def datum(r):
        v = height * np.exp(-(((r - center) / width) ** 2))
        return np.where(v < cutoff, 0.0, v)

    return datum


def init_from_datum(kind, grid: Grid1D, datum: Callable | np.ndarray) -> Field:
    kind = SymmetryClass.parse(kind)
    if kind is SymmetryClass.ELLIPTIC and grid.rho_min < 0:
        raise OutOfDomain("elliptic grids must start at rho >= 0")
    vals = np.asarray(datum(grid.nodes) if callable(datum) else datum, dtype=float)
    if vals.shape != (grid.n,):
        raise InvalidDatum(f"datum has shape {vals.shape}, grid has {grid.n} points")
    if not np.all(np.isfinite(vals)) or vals.min() < 0 or vals.max() > 1:
        raise InvalidDatum("datum values must lie in [0, 1]")
    return Field(grid, vals.copy(), 0.0)


def sup_norm(fld: Field) -> float:
    return float(fld.values.max()) if fld.values.size else 0.0


# --------------------------------------------------------------------------
# spatial operator


@dataclass(frozen=True, eq=False)
class Tridiag:
    """Rows ``lower[j] (u[j-1] - u[j]) + upper[j] (u[j+1] - u[j])``.

    Every operator built here has zero row sums, so it is stored in this
    flux form: constants are annihilated exactly, in floating point too.
    ``lower[0]`` and ``upper[-1]`` are zero.
    """

    lower: np.ndarray
    upper: np.ndarray

    @property
    def diag(self) -> np.ndarray:
        return -(self.lower + self.upper)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        du = np.diff(u)
        out[:-1] += self.upper[:-1] * du
        out[1:] -= self.lower[1:] * du
        return out


def drift_coefficients(kind, d: int, grid: Grid1D) -> np.ndarray:
    kind = SymmetryClass.parse(kind)
    rho = grid.nodes
    b = np.zeros_like(rho)
    if kind is SymmetryClass.ELLIPTIC:
        pos = rho > 0
        b[pos] = (d - 1) * drift_h1(kind, rho[pos])
    else:
        b[:] = (d - 1) * drift_h1(kind, rho)
    return b


def linear_operator(kind, d: int, grid: Grid1D, left_bc: BC, right_bc: BC) -> Tridiag:
    """Discrete ``u_rr + (d-1) h1 u_r`` with boundary rows.

    The drift uses centred differences where the cell Peclet number
    ``|b| h / 2`` is at most 1 and first-order upwinding elsewhere, so the
    off-diagonal entries are never negative.  Dirichlet rows are zero (the
    boundary value is held fixed).  At the elliptic origin the radial
    Laplacian degenerates to ``d u_rr`` with a reflecting ghost node.
    """
    kind = SymmetryClass.parse(kind)
    h = grid.drho
    b = drift_coefficients(kind, d, grid)
    inv2 = 1.0 / (h * h)
    central = np.abs(b) * h / 2.0 <= 1.0
    lower = np.where(central, inv2 - b / (2 * h), inv2 + np.maximum(-b, 0.0) / h)
    upper = np.where(central, inv2 + b / (2 * h), inv2 + np.maximum(b, 0.0) / h)

    origin = kind is SymmetryClass.ELLIPTIC and grid.rho_min == 0.0
    if origin and left_bc is not BC.NEUMANN0:
        raise ConfigError("the elliptic origin needs left_bc = neumann0")
    if left_bc is BC.NEUMANN0:
        # ghost node u[-1] = u[1]; at the origin the operator is d u_rr
        upper[0] = 2.0 * d * inv2 if origin else upper[0] + lower[0]
    else:
        upper[0] = 0.0
    lower[0] = 0.0
    if right_bc is BC.NEUMANN0:
        lower[-1] = lower[-1] + upper[-1]
    else:
        lower[-1] = 0.0
    upper[-1] = 0.0
    return Tridiag(lower, upper)


def monotone_dt(op: Tridiag) -> float:
    """Largest ``dt`` for which ``I + dt/2 L`` (the explicit half of CN) has a
    non-negative diagonal; with non-negative off-diagonals this makes the CN
    step order preserving."""
    worst = -op.diag.min()
    return math.inf if worst <= 0 else 2.0 / worst


def explicit_dt_limit(op: Tridiag) -> float:
    worst = -op.diag.min()
    return math.inf if worst <= 0 else 1.0 / worst


class _Factored:
    """LU factors of ``I - coef L`` for repeated solves."""

    def __init__(self, op: Tridiag, coef: float):
        dl = -coef * op.lower[1:]
        d = 1.0 - coef * op.diag
        du = -coef * op.upper[:-1]
        self.factors = lapack.dgttrf(dl, d, du)
        info = self.factors[-1]
        if info != 0:
            raise SolverFailure(f"tridiagonal factorisation failed (info={info})")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv, _ = self.factors
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise SolverFailure(f"tridiagonal solve failed (info={info})")
        return x


@dataclass
class _Stepper:
    f: ReactionFn
    kind: SymmetryClass
    d: int
    cfg: SolverConfig
    grid: Grid1D
    left_bc: BC
    op: Tridiag = field(init=False)
    _cn: _Factored | None = field(init=False, default=None)
    _be: _Factored | None = field(init=False, default=None)
    max_clip: float = 0.0

    def __post_init__(self):
        self.rebuild(self.grid, self.left_bc)

    def rebuild(self, grid: Grid1D, left_bc: BC) -> None:
        self.grid, self.left_bc = grid, left_bc
        self.op = linear_operator(self.kind, self.d, grid, left_bc, self.cfg.right_bc)
        self._cn = self._be = None
        if self.cfg.scheme is Scheme.EXPLICIT_EULER:
            limit = min(0.4 * grid.drho**2, explicit_dt_limit(self.op))
            if self.cfg.dt > limit * (1 + 1e-12):
                raise ConfigError(
                    f"explicit_euler needs dt <= {limit:.4g} on this grid, got {self.cfg.dt:g}"
                )

    def _bc_values(self, u: np.ndarray) -> None:
        if self.left_bc is BC.DIRICHLET1:
            u[0] = 1.0
        elif self.left_bc is BC.DIRICHLET0:
            u[0] = 0.0
        if self.cfg.right_bc is BC.DIRICHLET0:
            u[-1] = 0.0

    def _react(self, u: np.ndarray, tau: float) -> np.ndarray:
        k1 = self.f.eval(u)
        k2 = self.f.eval(u + tau * k1)
        return u + 0.5 * tau * (k1 + k2)

    def _linear(self, u: np.ndarray, startup: bool) -> np.ndarray:
        # increment form: (I - k L) delta = (rhs built from L u), so that a
        # state with L u = 0 (constants) is reproduced bit for bit
        dt = self.cfg.dt
        if startup:
            if self._be is None:
                self._be = _Factored(self.op, 0.5 * dt)
            for _ in range(2):
                u = u + self._be.solve(0.5 * dt * self.op.matvec(u))
            return u
        if self._cn is None:
            self._cn = _Factored(self.op, 0.5 * dt)
        return u + self._cn.solve(dt * self.op.matvec(u))

    def advance(self, u: np.ndarray, step_index: int) -> np.ndarray:
        dt = self.cfg.dt
        u = u.copy()
        self._bc_values(u)
        if self.cfg.scheme is Scheme.EXPLICIT_EULER:
            new = u + dt * (self.op.matvec(u) + self.f.eval(u))
        else:
            startup = step_index < self.cfg.rannacher
            new = self._react(u, 0.5 * dt)
            new = self._linear(new, startup)
            new = self._react(new, 0.5 * dt)
        if not np.all(np.isfinite(new)):
            raise SolverFailure("non-finite values after step")
        self._bc_values(new)
        over = max(float(new.max()) - 1.0, -float(new.min()), 0.0)
        self.max_clip = max(self.max_clip, over)
        np.clip(new, 0.0, 1.0, out=new)
        new[new < FLUSH] = 0.0
        return new


def step(f: ReactionFn, kind, d: int, fld: Field, cfg: SolverConfig) -> Field:
    """Advance ``fld`` by one step of size ``cfg.dt`` (no window shifting)."""
    kind = SymmetryClass.parse(kind)
    st = _Stepper(f, kind, d, cfg, fld.grid, cfg.left_bc)
    new = st.advance(fld.values, fld.step_index)
    return Field(fld.grid, new, fld.time + cfg.dt, fld.step_index + 1)


@dataclass(frozen=True)
class WindowShift:
    time: float
    cells: int
    rho_min: float


@dataclass
class RunResult:
    """Snapshots of a run plus bookkeeping.  Iterates over the snapshots."""

    snapshots: list[Field]
    shifts: list[WindowShift]
    steps: int
    max_clip: float
    max_left_deficit: float = 0.0

    def __iter__(self):
        return iter(self.snapshots)

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])


def run(
    f: ReactionFn,
    kind,
    d: int,
    fld: Field,
    cfg: SolverConfig,
    t_end: float,
    snapshot_times: Iterable[float] = (),
    observer: Callable[[Field], None] | None = None,
) -> RunResult:
    """Integrate from ``fld.time`` to the absolute time ``t_end``, recording
    the field at the steps nearest to ``snapshot_times`` (absolute times).
    The initial field is always the first snapshot.

    ``observer`` is called with every recorded snapshot, which allows
    streaming analyses without keeping the snapshots (pass it and discard the
    returned list if memory matters).
    """
    kind = SymmetryClass.parse(kind)
    times = list(snapshot_times)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("snapshot times must be strictly increasing")
    t0 = fld.time
    if t_end < t0 - 1e-12:
        raise ConfigError(f"t_end={t_end:g} lies before the field time {t0:g}")
    if times and (times[0] < t0 - 1e-12 or times[-1] > t_end + 1e-12):
        raise ConfigError("snapshot times must lie in [field time, t_end]")
    if cfg.window is not None and f.fprime0 > 0:
        cfg.window.check(math.sqrt(f.fprime0))

    dt = cfg.dt
    n_steps = int(round((t_end - t0) / dt))
    wanted = sorted({min(n_steps, int(round((t - t0) / dt))) for t in times})
    st = _Stepper(f, kind, d, cfg, fld.grid, cfg.left_bc)
    u = fld.values.copy()
    grid = fld.grid
    k0 = fld.step_index
    snaps: list[Field] = []
    shifts: list[WindowShift] = []
    left_deficit = 0.0

    def record(k: int) -> None:
        s = Field(grid, u.copy(), t0 + k * dt, k0 + k)
        if observer is not None:
            observer(s)
        snaps.append(s)

    record(0)
    wi = 0
    while wi < len(wanted) and wanted[wi] == 0:
        wi += 1
    win = cfg.window
    pad_cells = int(math.ceil(win.pad_right / grid.drho)) if win else 0
    if win and pad_cells >= grid.n - 1:
        raise ConfigError("window pad_right does not fit inside the grid")
    for k in range(1, n_steps + 1):
        u = st.advance(u, k0 + k - 1)
        if win is not None:
            probe = grid.n - 1 - pad_cells
            if u[probe] > win.trigger_level:
                above = np.flatnonzero(u > win.trigger_level)
                need = int(above[-1]) - probe + 1
                cells = win.shift_chunk * int(math.ceil(need / win.shift_chunk))
                left_deficit = max(left_deficit, float(1.0 - u[:cells].min()))
                u = np.concatenate([u[cells:], np.zeros(cells)])
                grid = grid.shifted(cells)
                shifts.append(WindowShift(t0 + k * dt, cells, grid.rho_min))
                st.rebuild(grid, win.left_bc_after_shift)
                log.debug("window shift by %d cells at t=%.3f", cells, t0 + k * dt)
        if wi < len(wanted) and wanted[wi] == k:
            record(k)
            wi += 1
    if st.max_clip > 1e-9:
        log.warning("clipping reached %.3g (monitor threshold 1e-9)", st.max_clip)
    return RunResult(snaps, shifts, n_steps, st.max_clip, left_deficit)


def discrete_speed(
    fprime0: float, d: int, drho: float, dt: float, scheme: Scheme | str = Scheme.IMEX_CN
) -> tuple[float, float]:
    """Minimal speed and decay rate of the fully discrete linearised scheme
    on a uniform far-field grid (drift coefficient ``d - 1``, centred).

    A mode ``exp(-lam (r - c t))`` grows by ``G(lam)`` per step; the scheme's
    pulled-front speed is ``min_lam log G(lam) / (lam dt)``.  It sits below
    the continuum ``c0 - (d - 1)`` by ``O(drho^2 + dt^2)``, which accumulates
    into a position drift over long runs.
    """
    from scipy.optimize import minimize_scalar

    scheme = Scheme(scheme)
    a, h = float(fprime0), float(drho)

    def speed(lam):
        mu = 2.0 * (math.cosh(lam * h) - 1.0) / h**2 - (d - 1) * math.sinh(lam * h) / h
        if scheme is Scheme.EXPLICIT_EULER:
            growth = math.log1p(dt * (mu + a))
        else:
            tau = 0.5 * dt
            growth = 2.0 * math.log1p(tau * a + 0.5 * (tau * a) ** 2)
            growth += math.log((1.0 + 0.5 * dt * mu) / (1.0 - 0.5 * dt * mu))
        return growth / (lam * dt)

    lam0 = math.sqrt(a)
    res = minimize_scalar(speed, bounds=(0.2 * lam0, 5.0 * lam0), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.fun), float(res.x)
