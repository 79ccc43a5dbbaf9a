"""Experiment configuration: strict TOML/JSON schema with unknown-key
rejection.  Every section is a dataclass; :func:`load_config` builds the tree
and :func:`echo` turns it back into plain data for manifests."""
from __future__ import annotations

import dataclasses
import inspect
import json
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError
from .reaction import BUILTINS, ReactionFn, from_spec


@dataclass
class ReactionSpec:
    name: str
    params: dict = field(default_factory=dict)

    def build(self) -> ReactionFn:
        return from_spec(self.name, **self.params)


@dataclass
class GridSpec:
    rho_min: float = 0.0
    rho_max: float = 300.0
    drho: float = 0.05


@dataclass
class WindowSpec:
    trigger_level: float = 1e-8
    pad_right: float = 200.0
    shift_chunk: int = 100


@dataclass
class SolverSpec:
    scheme: str = "imex_cn"
    dt: Optional[float] = None
    left_bc: Optional[str] = None
    right_bc: str = "dirichlet0"
    rannacher: int = 4
    window: Optional[WindowSpec] = None


@dataclass
class DatumSpec:
    kind: str = "indicator"
    a: float = 0.0
    b: float = 5.0
    center: float = 0.0
    width: float = 1.0
    height: float = 1.0
    n_bumps: int = 4


@dataclass
class ScheduleSpec:
    t_end: float
    snapshot_every: float = 1.0
    write_every: Optional[float] = None


@dataclass
class AnalysisSpec:
    level: float = 0.5
    front_window: Optional[list] = None
    convergence: bool = False
    extinction_window: Optional[list] = None
    superdiffusive_eps: Optional[float] = None
    plot: bool = False


@dataclass
class WaveSpec:
    c: Optional[float] = None
    tol: float = 1e-8
    ds: float = 0.01


@dataclass
class DipoleSpec:
    datum: str = "random"
    eta_max: float = 12.0
    deta: float = 0.01
    dtau: float = 1e-3
    tau_end: float = 6.0
    record_every: float = 0.1
    n_bumps: int = 4


@dataclass
class KernelSpec:
    times: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    r_max: float = 20.0
    n: int = 1000


@dataclass
class DichotomySpec:
    fprime0: list = field(default_factory=lambda: [0.5, 1.0, 4.0])
    horizon: float = 200.0
    probe: list = field(default_factory=lambda: [0.0, 5.0])
    drho: float = 0.1
    dt: float = 0.01


@dataclass
class SweepSpec:
    command: str = "front-fit"
    vary: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    run_id: str = "run"
    d: int = 3
    symmetry: str = "parabolic"
    seed: int = 0
    reaction: Optional[ReactionSpec] = None
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    datum: DatumSpec = field(default_factory=DatumSpec)
    schedule: Optional[ScheduleSpec] = None
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    wave: WaveSpec = field(default_factory=WaveSpec)
    dipole: DipoleSpec = field(default_factory=DipoleSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    dichotomy: DichotomySpec = field(default_factory=DichotomySpec)
    sweep: Optional[SweepSpec] = None

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"missing required section '{name}'")
        return value


# --------------------------------------------------------------------------
# building


def _unwrap_optional(tp):
    if typing.get_origin(tp) is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False


def _coerce(value, tp, path: str):
    tp, optional = _unwrap_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"'{path}' may not be null")
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"'{path}' must be a table")
        return _build(tp, value, path)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{path}' must be a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{path}' must be an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"'{path}' must be true or false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"'{path}' must be a string, got {value!r}")
        return value
    if tp is list:
        if not isinstance(value, list):
            raise ConfigError(f"'{path}' must be a list, got {value!r}")
        return list(value)
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"'{path}' must be a table, got {value!r}")
        return dict(value)
    raise ConfigError(f"unsupported type for '{path}'")  # pragma: no cover


def _build(cls, table: dict, path: str):
    if cls is ReactionSpec:
        return _build_reaction(table, path)
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    aliases = {"class": "symmetry"} if cls is ExperimentConfig else {}
    kwargs = {}
    for key, value in table.items():
        name = aliases.get(key, key)
        if name not in fields:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown key '{where}'")
        sub = f"{path}.{key}" if path else key
        kwargs[name] = _coerce(value, hints[name], sub)
    for name, f in fields.items():
        no_default = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if no_default and name not in kwargs:
            where = f"{path}.{name}" if path else name
            raise ConfigError(f"missing required field '{where}'")
    return cls(**kwargs)


def _build_reaction(table: dict, path: str) -> ReactionSpec:
    table = dict(table)
    name = table.pop("name", None)
    if not isinstance(name, str):
        raise ConfigError(f"missing required field '{path}.name'")
    if name not in BUILTINS:
        raise ConfigError(f"unknown reaction '{name}' (known: {', '.join(sorted(BUILTINS))})")
    params = table.pop("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"'{path}.params' must be a table")
    params.update(table)
    allowed = inspect.signature(BUILTINS[name]).parameters
    for key in params:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}' for reaction '{name}'")
    return ReactionSpec(name, params)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a ``.toml`` config, a ``.json`` config, or a run manifest (whose
    ``config`` entry is the echo of the config that produced it)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(raw)
            if isinstance(data, dict) and "config" in data and "files" in data:
                data = data["config"]
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(data)


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_strip_none(v) for v in obj]
    return obj


def echo(cfg: ExperimentConfig) -> dict[str, Any]:
    """Plain-data form of ``cfg`` that :func:`config_from_dict` accepts."""
    data = _strip_none(dataclasses.asdict(cfg))
    data["class"] = data.pop("symmetry")
    if cfg.reaction is not None:
        r = data.pop("reaction")
        data["reaction"] = {"name": r["name"], **r["params"]}
    return data


def with_overrides(data: dict, overrides: dict[str, Any]) -> dict:
    """Copy of ``data`` with dotted keys (``"reaction.a"``) replaced."""
    out = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        node = out
        parts = dotted.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{dotted}' descends into a non-table")
        node[parts[-1]] = value
    return out
