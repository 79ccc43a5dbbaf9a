"""Artifact writers: fixed-format CSV, run manifests with checksums, and
static line plots."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidData


def fmt(x) -> str:
    """17 significant digits, '.' decimal separator, plain ints and strings."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_columns(path: Path, header: Sequence[str], *columns) -> Path:
    return write_csv(path, header, zip(*columns))


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a numeric CSV (possibly with zero rows)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InvalidData(f"{path} is empty")
    header = [h.strip() for h in lines[0].split(",")]
    rows = [ln for ln in lines[1:] if ln.strip()]
    try:
        data = np.array([[float(x) for x in ln.split(",")] for ln in rows], dtype=float)
    except ValueError as exc:
        raise InvalidData(f"{path}: non-numeric entry ({exc})") from exc
    return header, data.reshape(len(rows), len(header))


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, config: dict, files: Sequence[Path], wall_time: float,
                   stats: dict | None = None) -> Path:
    out = Path(out)
    entries = [
        {"path": str(Path(f).relative_to(out)), "sha256": sha256(f)} for f in sorted(files)
    ]
    manifest = {
        "config": config,
        "files": entries,
        "wall_time_s": wall_time,
        "stats": stats or {},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def line_plot(path: Path, series: Sequence[tuple[np.ndarray, np.ndarray, str]],
              xlabel: str, ylabel: str, logy: bool = False) -> Path:
    """PNG with one line per ``(x, y, label)``; no embedded timestamps."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for x, y, label in series:
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if any(lbl for *_, lbl in series):
        ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path
