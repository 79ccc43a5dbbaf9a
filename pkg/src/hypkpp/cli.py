"""Command-line front end.

    hypkpp wave       --config cfg.toml --out DIR
    hypkpp simulate   --config cfg.toml --out DIR
    hypkpp front-fit  --config cfg.toml --out DIR   (or --trace trace.csv)
    hypkpp dipole     --config cfg.toml --out DIR
    hypkpp kernel     --out DIR [--t 0.1 1 10]
    hypkpp dichotomy  --config cfg.toml --out DIR
    hypkpp sweep      --config cfg.toml --out DIR --threads N

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import itertools
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import frontlab, geometry, selfsim, waves
from .config import ExperimentConfig, config_from_dict, echo, load_config, with_overrides
from .errors import ConfigError, InvalidData, NoFront, NumericalError, ValidationError
from .evolve import (
    BC,
    Grid1D,
    MovingWindow,
    SolverConfig,
    bump,
    indicator,
    init_from_datum,
    run,
    step_datum,
    sup_norm,
)
from .geometry import SymmetryClass
from .io import line_plot, read_csv, write_columns, write_csv, write_manifest
from .reaction import logistic, speeds

log = logging.getLogger("hypkpp")

COMMANDS = ("wave", "simulate", "front-fit", "dipole", "kernel", "dichotomy", "sweep")


@dataclass
class CommandResult:
    files: list[Path] = field(default_factory=list)
    header: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# shared builders


def random_bumps(rng: np.random.Generator, n: int, lo: float, hi: float, height: float = 1.0):
    """Sum of ``n`` smooth compact bumps with centres in ``[lo, hi]``,
    capped at ``height``."""
    centers = rng.uniform(lo, hi, n)
    widths = rng.uniform(0.2, 0.6, n) * max(hi - lo, 1e-9) / 4.0
    amps = rng.uniform(0.2, 1.0, n)

    def datum(x):
        x = np.asarray(x, dtype=float)
        v = np.zeros_like(x)
        for c, w, a in zip(centers, widths, amps):
            z = (x - c) / w
            inside = np.abs(z) < 1
            v[inside] += a * np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
        return np.minimum(v, height)

    return datum


def build_datum(cfg: ExperimentConfig):
    ds = cfg.datum
    if ds.kind == "indicator":
        return indicator(ds.a, ds.b)
    if ds.kind == "step":
        return step_datum(ds.b)
    if ds.kind == "bump":
        return bump(ds.center, ds.width, ds.height)
    if ds.kind == "zero":
        return lambda r: np.zeros_like(r)
    if ds.kind == "random_bumps":
        return random_bumps(np.random.default_rng(cfg.seed), ds.n_bumps, ds.a, ds.b, ds.height)
    raise ConfigError(f"unknown datum kind '{ds.kind}'")


def build_solver(cfg: ExperimentConfig) -> tuple[Grid1D, SolverConfig]:
    g = cfg.grid
    grid = Grid1D.from_spacing(g.rho_min, g.rho_max, g.drho)
    s = cfg.solver
    window = None
    if s.window is not None:
        window = MovingWindow(s.window.trigger_level, s.window.pad_right, s.window.shift_chunk)
    try:
        solver = SolverConfig(
            dt=s.dt if s.dt is not None else 0.2 * grid.drho,
            scheme=s.scheme,
            left_bc=s.left_bc or BC.NEUMANN0,
            right_bc=s.right_bc,
            window=window,
            rannacher=s.rannacher,
        )
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ConfigError(str(exc)) from exc
    return grid, solver


@dataclass
class Simulation:
    kept: list
    trace_t: np.ndarray
    trace_m: np.ndarray
    sups: np.ndarray
    result: object


def simulate(cfg: ExperimentConfig) -> Simulation:
    f = cfg.require("reaction").build()
    sched = cfg.require("schedule")
    kind = SymmetryClass.parse(cfg.symmetry)
    grid, solver = build_solver(cfg)
    fld = init_from_datum(kind, grid, build_datum(cfg))
    every = sched.snapshot_every
    if not every > 0:
        raise ConfigError("schedule.snapshot_every must be positive")
    times = np.arange(1, int(math.floor(sched.t_end / every + 1e-9)) + 1) * every
    write_every = sched.write_every or sched.t_end / 10.0 or every
    ratio = max(1, int(round(write_every / every)))
    tr_t, tr_m, sups, kept = [], [], [], []
    counter = itertools.count()

    def observe(snap):
        i = next(counter)
        tr_t.append(snap.time)
        sups.append(sup_norm(snap))
        try:
            tr_m.append(frontlab.front_position(snap, cfg.analysis.level))
        except NoFront:
            tr_m.append(math.nan)
        if i % ratio == 0 or i == len(times):
            kept.append(snap)

    res = run(f, kind, cfg.d, fld, solver, sched.t_end, times, observer=observe)
    res.snapshots.clear()  # everything needed was streamed through observe
    return Simulation(kept, np.array(tr_t), np.array(tr_m), np.array(sups), res)


# --------------------------------------------------------------------------
# commands


def cmd_wave(cfg: ExperimentConfig, out: Path) -> CommandResult:
    f = cfg.require("reaction").build()
    ws = cfg.wave
    c0 = 2.0 * math.sqrt(f.fprime0)
    c = c0 if ws.c is None else ws.c
    prof = waves.normalize_half(waves.solve_profile(f, c, tol=ws.tol, ds=ws.ds))
    prof = waves.with_tail(prof)
    resid = float(np.abs(waves.ode_residual(prof, f)).max())
    res = CommandResult()
    res.files.append(write_columns(out / "profile.csv", ["s", "U"], prof.s, prof.values))
    res.header = ["c", "c0", "minimal", "lambda_hat", "kappa_hat", "tail_amp", "max_residual"]
    res.rows = [[c, c0, prof.is_minimal, prof.tail_lambda, prof.tail_kappa, prof.tail_amp, resid]]
    res.files.append(write_csv(out / "wave_summary.csv", res.header, res.rows))
    return res


def _simulation_outputs(cfg, out: Path, sim: Simulation, res: CommandResult) -> None:
    for i, snap in enumerate(sim.kept):
        res.files.append(
            write_columns(out / "snapshots" / f"snap_{i:04d}.csv", ["rho", "u"], snap.rho, snap.values)
        )
    res.files.append(
        write_csv(
            out / "snapshots" / "index.csv",
            ["index", "time", "rho_min", "rho_max"],
            [[i, s.time, s.grid.rho_min, s.grid.rho_max] for i, s in enumerate(sim.kept)],
        )
    )
    res.files.append(write_columns(out / "front.csv", ["t", "m", "sup_u"], sim.trace_t, sim.trace_m, sim.sups))
    r = sim.result
    res.files.append(
        write_csv(out / "window_shifts.csv", ["time", "cells", "rho_min"],
                  [[s.time, s.cells, s.rho_min] for s in r.shifts])
    )
    res.stats.update(steps=r.steps, window_shifts=len(r.shifts), max_clip=r.max_clip)


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> CommandResult:
    sim = simulate(cfg)
    res = CommandResult()
    _simulation_outputs(cfg, out, sim, res)
    res.header = ["t_end", "sup_u", "m"]
    res.rows = [[sim.trace_t[-1] if sim.trace_t.size else 0.0,
                 sim.sups[-1] if sim.sups.size else math.nan,
                 sim.trace_m[-1] if sim.trace_m.size else math.nan]]
    return res


RESULT_HEADER = ["run_id", "d", "class", "fprime0", "a_hat", "b_hat", "beta", "residual_rms"]


def _fit_window(cfg, t: np.ndarray) -> tuple[float, float]:
    if cfg.analysis.front_window is not None:
        lo, hi = cfg.analysis.front_window
        return float(lo), float(hi)
    return float(t[0]), float(t[-1])


def cmd_front_fit(cfg: ExperimentConfig, out: Path, trace_path: Path | None = None) -> CommandResult:
    res = CommandResult()
    if trace_path is not None:
        header, data = read_csv(trace_path)
        if data.shape[0] == 0:
            raise InvalidData(f"trace file {trace_path} has no samples")
        if header[:2] != ["t", "m"]:
            raise InvalidData("trace file needs columns 't,m'")
        ok = np.isfinite(data[:, 1])
        trace = frontlab.FrontTrace(data[ok, 0], data[ok, 1])
        fit = frontlab.fit_front(trace, _fit_window(cfg, trace.t), min_samples=3)
        fp0 = cfg.reaction.build().fprime0 if cfg.reaction is not None else math.nan
        res.rows = [[cfg.run_id, cfg.d, cfg.symmetry, fp0, fit.a_hat, fit.b_hat, math.nan, fit.residual_rms]]
    else:
        f = cfg.require("reaction").build()
        sim = simulate(cfg)
        _simulation_outputs(cfg, out, sim, res)
        ok = np.isfinite(sim.trace_m)
        if not ok.any():
            raise NoFront("the run never developed a front")
        trace = frontlab.FrontTrace(sim.trace_t[ok], sim.trace_m[ok], cfg.analysis.level)
        fit = frontlab.fit_front(trace, _fit_window(cfg, trace.t))
        profile = waves.minimal_profile(f)
        frame = selfsim.FrameParams.from_reaction(f, cfg.d)
        lo = fit.window[0]
        snaps = [s for s in sim.kept if s.time >= max(lo, 1.0)]
        beta = frontlab.estimate_beta(snaps, profile, frame)
        res.rows = [[cfg.run_id, cfg.d, cfg.symmetry, f.fprime0, fit.a_hat, fit.b_hat, beta, fit.residual_rms]]
        if cfg.analysis.convergence or cfg.analysis.plot:
            errs = frontlab.convergence_error(snaps, profile, frame, beta)
            res.files.append(write_csv(out / "convergence.csv", ["t", "sup_error"], errs))
            if cfg.analysis.plot:
                e = np.array(errs)
                res.files.append(line_plot(out / "sup_error.png", [(e[:, 0], e[:, 1], "")],
                                           "t", "sup error", logy=True))
    res.header = RESULT_HEADER
    res.files.append(write_csv(out / "results.csv", res.header, res.rows))
    if cfg.analysis.plot:
        sel = (trace.t >= fit.window[0]) & (trace.t <= fit.window[1])
        tt = trace.t[sel]
        res.files.append(line_plot(out / "front_log.png",
                                   [(np.log(tt), trace.m[sel] - fit.a_hat * tt, "")],
                                   "log t", "m(t) - a_hat t"))
    return res


def cmd_dipole(cfg: ExperimentConfig, out: Path) -> CommandResult:
    dp = cfg.dipole
    if dp.datum == "dipole":
        w = selfsim.SelfSimField.uniform(selfsim.dipole, dp.eta_max, dp.deta)
    elif dp.datum == "random":
        rng = np.random.default_rng(cfg.seed)
        w = selfsim.SelfSimField.uniform(random_bumps(rng, dp.n_bumps, 0.3, 4.0), dp.eta_max, dp.deta)
    else:
        raise ConfigError(f"unknown dipole datum '{dp.datum}' (use 'dipole' or 'random')")
    every = max(1, int(round(dp.record_every / dp.dtau)))
    n = int(round(dp.tau_end / dp.dtau))
    m0 = selfsim.dipole_moment(w)
    alpha = float(m0) / selfsim.DIPOLE_NORM
    final, hist = selfsim.fp_evolve(w, dp.dtau, n, every=every)
    rows = [[s.tau, float(selfsim.dipole_moment(s)), selfsim.dipole_distance(s, alpha)] for s in [w, *hist]]
    res = CommandResult(header=["tau", "dipole_moment", "dipole_distance"], rows=rows)
    res.files.append(write_csv(out / "dipole.csv", res.header, rows))
    res.files.append(write_columns(out / "profile.csv", ["eta", "w"], final.eta, final.values))
    res.stats.update(alpha=alpha, steps=n)
    return res


def cmd_kernel(cfg: ExperimentConfig, out: Path) -> CommandResult:
    ks = cfg.kernel
    rows = []
    res = CommandResult()
    for t in ks.times:
        t = float(t)
        r = np.linspace(0.0, ks.r_max, ks.n + 1)
        p = geometry.heat_kernel_P3(r, t)
        h = geometry.heat_kernel_bound_h(3, r, t)
        res.files.append(write_columns(out / f"kernel_t{t:g}.csv", ["r", "P3", "h", "ratio"], r, p, h, geometry.kernel_ratio(r, t)))
        mass = geometry.p3_mass(t)
        lo, hi = geometry.kernel_ratio_check(t, ks.r_max, ks.n)
        resid = max(geometry.radial_heat_residual(x, t) for x in (0.5, 1.0, 2.0, 5.0))
        rows.append([t, mass, abs(mass - 1.0), lo, hi, resid])
    res.header = ["t", "mass", "mass_error", "ratio_min", "ratio_max", "max_rel_residual"]
    res.rows = rows
    res.files.append(write_csv(out / "kernel_summary.csv", res.header, rows))
    return res


def cmd_dichotomy(cfg: ExperimentConfig, out: Path) -> CommandResult:
    dc = cfg.dichotomy
    kind = SymmetryClass.parse(cfg.symmetry)
    datum = build_datum(cfg)
    rows = []
    for fp0 in dc.fprime0:
        f = logistic(float(fp0))
        outcome = frontlab.classify_dichotomy(
            f, kind, cfg.d, datum, horizon=dc.horizon, probe=tuple(dc.probe), drho=dc.drho, dt=dc.dt
        )
        rows.append([float(fp0), speeds(f, cfg.d).lambda1, cfg.d, kind.value, outcome.value])
    res = CommandResult(header=["fprime0", "lambda1", "d", "class", "outcome"], rows=rows)
    res.files.append(write_csv(out / "dichotomy.csv", res.header, rows))
    return res


def _sweep_job(args):
    command, data, out = args
    cfg = config_from_dict(data)
    res = _dispatch(command, cfg, Path(out))
    return res.header, res.rows


def cmd_sweep(cfg: ExperimentConfig, out: Path, threads: int = 1) -> CommandResult:
    sw = cfg.require("sweep")
    if sw.command not in COMMANDS or sw.command == "sweep":
        raise ConfigError(f"sweep.command must be one of {COMMANDS[:-1]}")
    base = echo(cfg)
    base.pop("sweep")
    keys = sorted(sw.vary)
    for k in keys:
        if not isinstance(sw.vary[k], list) or not sw.vary[k]:
            raise ConfigError(f"sweep.vary.{k} must be a non-empty list")
    jobs = []
    for i, combo in enumerate(itertools.product(*(sw.vary[k] for k in keys))):
        run_id = f"{cfg.run_id}_{i:03d}"
        data = with_overrides(base, {**dict(zip(keys, combo)), "run_id": run_id})
        config_from_dict(data)  # validate before fanning out
        jobs.append((sw.command, data, str(out / run_id)))
    with ProcessPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(_sweep_job, jobs))
    header = ["job"] + [f"vary.{k}" for k in keys] + (results[0][0] if results else [])
    rows = []
    for (cmd, data, path), (_, jrows) in zip(jobs, results):
        combo = [_lookup(data, k) for k in keys]
        rows.extend([Path(path).name, *combo, *r] for r in jrows)
    res = CommandResult(header=header, rows=rows)
    res.files.append(write_csv(out / "sweep_results.csv", header, rows))
    for _, _, path in jobs:
        res.files.extend(sorted(p for p in Path(path).rglob("*") if p.is_file()))
    return res


def _lookup(data: dict, dotted: str):
    node = data
    for p in dotted.split("."):
        node = node[p]
    return node


def _dispatch(command: str, cfg: ExperimentConfig, out: Path, **kw) -> CommandResult:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if command == "wave":
        res = cmd_wave(cfg, out)
    elif command == "simulate":
        res = cmd_simulate(cfg, out)
    elif command == "front-fit":
        res = cmd_front_fit(cfg, out, kw.get("trace"))
    elif command == "dipole":
        res = cmd_dipole(cfg, out)
    elif command == "kernel":
        res = cmd_kernel(cfg, out)
    elif command == "dichotomy":
        res = cmd_dichotomy(cfg, out)
    elif command == "sweep":
        res = cmd_sweep(cfg, out, kw.get("threads", 1))
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown command {command!r}")
    if command != "sweep":
        manifest = write_manifest(out, echo(cfg), res.files, time.perf_counter() - t0, res.stats)
        res.files.append(manifest)
    else:
        write_manifest(out, echo(cfg), [f for f in res.files if f.parent == out],
                       time.perf_counter() - t0, res.stats)
    return res


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypkpp", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="TOML or JSON config (or a manifest.json)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for sweep")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    parser.add_argument("--trace", type=Path, help="front-fit: CSV with columns t,m")
    parser.add_argument("--t", type=float, nargs="+", dest="times", help="kernel: times")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command in ("kernel", "dipole") or args.trace is not None:
            cfg = ExperimentConfig()
        else:
            raise ConfigError(f"'{args.command}' needs --config")
        if args.times:
            cfg.kernel.times = list(args.times)
        res = _dispatch(args.command, cfg, args.out, trace=args.trace, threads=args.threads)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        for row in res.rows:
            print(",".join(str(x) for x in row))
        log.info("wrote %d files to %s", len(res.files), args.out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
