"""Plain-text output formats: CSV tables, JSON reports and run manifests.

Floats are written with ``repr`` so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .model import level_of, levels
from .rates import Channel

__all__ = [
    "FORMAT_VERSION",
    "write_distribution_csv",
    "read_distribution_csv",
    "write_currents_csv",
    "write_g2_csv",
    "write_events_csv",
    "write_json",
    "write_manifest",
]

FORMAT_VERSION = "1.0"
PROBABILITY_FLOOR = 1e-300


def _f(x) -> str:
    return repr(float(x))


def write_distribution_csv(dist, path) -> Path:
    """``J,M,P`` rows for every state with ``P > 1e-300``, in index order."""
    path = Path(path)
    J, M = levels(dist.params)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["J", "M", "P"])
        for j, m, p in zip(J, M, dist.weights):
            if p > PROBABILITY_FLOOR:
                out.writerow([int(j), int(m), _f(p)])
    return path


def read_distribution_csv(params, path):
    from .steady import Distribution

    w = np.zeros(params.n_states)
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            j, m = int(row["J"]), int(row["M"])
            w[j * j + j + m] = float(row["P"])
    return Distribution(params, w)


def write_currents_csv(field, path) -> Path:
    path = Path(path)
    p = field.params
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["J_from", "M_from", "J_to", "M_to", "W"])
        for a, b, w in zip(field.source, field.target, field.W):
            la, lb = level_of(p, a), level_of(p, b)
            out.writerow([la.J, la.M, lb.J, lb.M, _f(w)])
    return path


def write_g2_csv(taus, values, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["tau", "g2"])
        for t, g in zip(taus, values):
            out.writerow([_f(t), _f(g)])
    return path


def write_events_csv(record, path, channels=None, t_from: float = 0.0) -> Path:
    """``t,channel,J_from,M_from,J_to,M_to`` rows, optionally filtered."""
    path = Path(path)
    p = record.params
    mask = record.times >= t_from
    if channels is not None:
        mask &= np.isin(record.channels, [int(c) for c in channels])
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "channel", "J_from", "M_from", "J_to", "M_to"])
        for k in np.flatnonzero(mask):
            la, lb = level_of(p, record.source[k]), level_of(p, record.target[k])
            out.writerow([_f(record.times[k]), Channel(int(record.channels[k])).label, la.J, la.M, lb.J, lb.M])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_manifest(out_dir, command: str, config: dict, outputs: list) -> Path:
    """Record the resolved configuration next to the data files."""
    from . import __version__

    manifest = {
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "command": command,
        "config": config,
        "outputs": [Path(o).name for o in outputs],
        "python": platform.python_version(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return write_json(manifest, Path(out_dir) / f"{command}_manifest.json")
