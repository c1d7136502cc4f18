"""Command-line entry point.

Subcommands ``steady``, ``sweep``, ``currents``, ``g2``, ``traj`` and
``analytic`` write plot-ready CSV/JSON files plus a JSON manifest into
``--out-dir``. Settings can also come from a ``key = value`` file passed with
``--config``; command-line flags take precedence.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import closedform, io
from .errors import SubradiantError
from .evolve import g2 as compute_g2
from .evolve import observables
from .kmc import burst_stats, simulate
from .model import Level, ModelParams
from .noneq import currents, entropy_rates
from .rates import Channel, build_generator
from .steady import steady_state

log = logging.getLogger("subradiant")

WORKERS_ENV = "SUBRADIANT_WORKERS"

DEFAULTS = {
    "N": None,
    "w": None,
    "gamma": 0.1,
    "out_dir": ".",
    "workers": None,
    "seed": 0,
    "t_max": 100.0,
    "burn_in": 40.0,
    "tau_max": 50.0,
    "points": 200,
    "grid": "linear",
    "filter": None,
    "window": 1.0,
    "w_range": None,
    "initial": None,
    "J": None,
}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(key, value):
    if value is None or not isinstance(value, str):
        return value
    if key in ("N",):
        parts = value.replace(",", " ").split()
        return [int(p) for p in parts] if len(parts) > 1 else int(parts[0])
    if key in ("w",):
        parts = value.replace(",", " ").split()
        return [float(p) for p in parts] if len(parts) > 1 else float(parts[0])
    if key in ("w_range", "initial"):
        return [float(p) if key == "w_range" else int(p) for p in value.replace(",", " ").split()]
    if key in ("workers", "seed", "points", "J"):
        return int(value)
    if key in ("gamma", "t_max", "burn_in", "tau_max", "window"):
        return float(value)
    return value


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            if k not in cfg:
                raise UsageError(f"unknown config key {k!r}")
            cfg[k] = _coerce(k, v)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["workers"] is None:
        env = os.environ.get(WORKERS_ENV)
        cfg["workers"] = int(env) if env else (os.cpu_count() or 1)
    return cfg


def _scalar(value, name):
    if isinstance(value, list):
        if len(value) != 1:
            raise UsageError(f"--{name} takes a single value for this command")
        return value[0]
    return value


def _params(cfg) -> ModelParams:
    N, w = _scalar(cfg["N"], "N"), _scalar(cfg["w"], "w")
    if N is None or w is None:
        raise UsageError("--N and --w are required")
    try:
        return ModelParams(int(N), float(w), float(cfg["gamma"]))
    except SubradiantError as exc:
        raise UsageError(str(exc)) from exc


def _out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(cfg, params=None) -> dict:
    clean = {k: v for k, v in cfg.items() if v is not None}
    clean["out_dir"] = str(clean.get("out_dir", "."))
    if params is not None:
        clean.update(params.as_dict())
    return clean


def cmd_steady(cfg) -> list[Path]:
    params = _params(cfg)
    out = _out_dir(cfg)
    gen = build_generator(params)
    dist = steady_state(gen)
    obs = observables(dist).as_dict()
    obs.update(params.as_dict())
    obs["solver"] = dist.info
    files = [
        io.write_distribution_csv(dist, out / "steady_distribution.csv"),
        io.write_json(obs, out / "steady_observables.json"),
    ]
    io.write_manifest(out, "steady", _echo(cfg, params), files)
    return files


def _sweep_point(point):
    N, w, gamma = point
    row = {"N": N, "w": w, "gamma": gamma}
    try:
        params = ModelParams(N, w, gamma)
        gen = build_generator(params)
        dist = steady_state(gen)
        ent = entropy_rates(gen, dist)
        obs = observables(dist)
        row.update(
            s_i_per_atom=ent.s_i_per_atom,
            intensity=obs.intensity,
            inversion=obs.inversion,
            boundary_mass=obs.boundary_mass,
            error="",
        )
    except SubradiantError as exc:
        row.update(s_i_per_atom="", intensity="", inversion="", boundary_mass="",
                   error=f"{type(exc).__name__}: {exc}")
    return row


def w_grid(cfg) -> list[float]:
    if cfg["w_range"] is not None:
        lo, hi, step = cfg["w_range"]
        if step <= 0 or hi < lo:
            raise UsageError("--w-range needs MIN MAX STEP with STEP > 0 and MAX >= MIN")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + k * step, 12) for k in range(n)]
    if cfg["w"] is None:
        raise UsageError("sweep needs --w or --w-range")
    return list(cfg["w"]) if isinstance(cfg["w"], list) else [cfg["w"]]


def cmd_sweep(cfg) -> list[Path]:
    Ns = cfg["N"]
    if Ns is None:
        raise UsageError("--N is required")
    Ns = Ns if isinstance(Ns, list) else [Ns]
    ws = w_grid(cfg)
    for N in Ns:
        if N < 2 or N % 2:
            raise UsageError(f"N must be even and >= 2, got {N}")
    points = sorted({(int(N), float(w), float(cfg["gamma"])) for N in Ns for w in ws})
    out = _out_dir(cfg)
    if cfg["workers"] > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            rows = list(pool.map(_sweep_point, points))
    else:
        rows = [_sweep_point(p) for p in points]
    rows.sort(key=lambda r: (r["N"], r["w"]))

    path = out / "sweep.csv"
    cols = ["N", "w", "gamma", "s_i_per_atom", "intensity", "inversion", "boundary_mass", "error"]
    with path.open("w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            cells = []
            for c in cols:
                v = r[c]
                cells.append(repr(float(v)) if isinstance(v, float) else str(v).replace(",", ";"))
            fh.write(",".join(cells) + "\n")
    io.write_manifest(out, "sweep", _echo(cfg), [path])
    return [path]


def cmd_currents(cfg) -> list[Path]:
    params = _params(cfg)
    out = _out_dir(cfg)
    gen = build_generator(params)
    dist = steady_state(gen)
    field = currents(gen, dist)
    files = [io.write_currents_csv(field, out / "currents.csv")]
    try:
        ent = entropy_rates(gen, dist)
    except SubradiantError as exc:
        log.warning("entropy rates not written: %s", exc)
    else:
        report = {
            "s_tot": ent.s_tot,
            "s_e": ent.s_e,
            "s_i": ent.s_i,
            "s_i_per_atom": ent.s_i_per_atom,
            "n_edges_skipped": ent.n_edges_skipped,
        }
        report.update(params.as_dict())
        files.append(io.write_json(report, out / "entropy.json"))
    io.write_manifest(out, "currents", _echo(cfg, params), files)
    return files


def tau_grid(cfg) -> np.ndarray:
    tmax, n = float(cfg["tau_max"]), int(cfg["points"])
    if tmax <= 0 or n < 2:
        raise UsageError("--tau-max must be > 0 and --points >= 2")
    if cfg["grid"] == "log":
        return np.concatenate([[0.0], np.geomspace(tmax * 1e-4, tmax, n - 1)])
    if cfg["grid"] != "linear":
        raise UsageError("--grid must be 'linear' or 'log'")
    return np.linspace(0.0, tmax, n)


def cmd_g2(cfg) -> list[Path]:
    params = _params(cfg)
    taus = tau_grid(cfg)
    out = _out_dir(cfg)
    gen = build_generator(params)
    dist = steady_state(gen)
    values = compute_g2(gen, dist, taus)
    files = [io.write_g2_csv(taus, values, out / "g2.csv")]
    io.write_manifest(out, "g2", _echo(cfg, params), files)
    return files


def _channel_filter(cfg):
    if not cfg["filter"]:
        return None
    try:
        return [Channel.from_label(s) for s in str(cfg["filter"]).split(",")]
    except KeyError as exc:
        raise UsageError(f"unknown channel {exc}") from exc


def cmd_traj(cfg) -> list[Path]:
    params = _params(cfg)
    channels = _channel_filter(cfg)
    initial = Level(*cfg["initial"]) if cfg["initial"] else None
    out = _out_dir(cfg)
    record = simulate(params, initial, float(cfg["t_max"]), seed=int(cfg["seed"]))
    burn = float(cfg["burn_in"])
    files = [io.write_events_csv(record, out / "events.csv", channels, t_from=burn)]
    stats = {
        "n_events_total": len(record),
        "absorbed": record.absorbed,
        "t_end": record.t_end,
        "seed": record.seed,
        "rng": record.rng,
        "initial": list(record.initial),
    }
    try:
        bs = burst_stats(record, channels or (Channel.COLLECTIVE_DECAY,), float(cfg["window"]), burn)
        stats.update(bs.as_dict())
    except SubradiantError as exc:
        stats["burst_stats_error"] = str(exc)
    stats.update(params.as_dict())
    files.append(io.write_json(stats, out / "burst_stats.json"))
    io.write_manifest(out, "traj", _echo(cfg, params), files)
    return files


def _frac(x: Fraction) -> dict:
    return {"fraction": f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator),
            "value": float(x)}


def cmd_analytic(cfg, which: str) -> list[Path]:
    if which == "ratios":
        Js = [cfg["J"]] if cfg["J"] is not None else [1, 2, 3, 4]
        try:
            result = {"ratios": {str(J): _frac(closedform.ratio_table(J)) for J in Js}}
        except SubradiantError as exc:
            raise UsageError(str(exc)) from exc
    elif which == "small-w":
        p0, p1, p2 = closedform.small_w_populations()
        result = {"P0": _frac(p0), "P1": _frac(p1), "P2": _frac(p2)}
    elif which == "gaussian":
        params = _params(cfg)
        try:
            g = closedform.gaussian_limit(params)
        except SubradiantError as exc:
            raise UsageError(str(exc)) from exc
        result = {"mu": g.mu, "sigma2": g.sigma2, "note": g.note, **params.as_dict()}
    elif which == "boundary":
        params = _params(cfg)
        b = closedform.boundary_recursion(params)
        result = {"P_J": b.P.tolist(), "mean": b.mean, "variance": b.variance, **params.as_dict()}
    else:
        raise UsageError(f"unknown analytic result {which!r}")
    out = _out_dir(cfg)
    path = io.write_json(result, out / f"analytic_{which}.json")
    if which == "ratios" and cfg["J"] is not None:
        print(result["ratios"][str(cfg["J"])]["fraction"])
    else:
        print(path.read_text(), end="")
    io.write_manifest(out, "analytic", _echo(cfg) | {"result": which}, [path])
    return [path]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subradiant", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        p.add_argument("--config", help="key = value file; flags override it")
        if multi:
            p.add_argument("--N", type=int, nargs="+")
            p.add_argument("--w", type=float, nargs="+")
        else:
            p.add_argument("--N", type=int)
            p.add_argument("--w", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--workers", type=int)

    common(sub.add_parser("steady", help="stationary distribution and observables"))

    p = sub.add_parser("sweep", help="entropy production and observables over (N, w)")
    common(p, multi=True)
    p.add_argument("--w-range", dest="w_range", type=float, nargs=3, metavar=("MIN", "MAX", "STEP"))

    common(sub.add_parser("currents", help="net probability currents and entropy rates"))

    p = sub.add_parser("g2", help="two-photon intensity correlation")
    common(p)
    p.add_argument("--tau-max", dest="tau_max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--grid", choices=["linear", "log"])

    p = sub.add_parser("traj", help="Gillespie trajectory and burst statistics")
    common(p)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=float)
    p.add_argument("--filter", help="comma-separated channels, e.g. 'collective'")
    p.add_argument("--window", type=float)
    p.add_argument("--initial", type=int, nargs=2, metavar=("J", "M"))

    p = sub.add_parser("analytic", help="closed-form boundary results")
    p.add_argument("which", choices=["ratios", "small-w", "gaussian", "boundary"])
    common(p)
    p.add_argument("--J", type=int)
    return parser


COMMANDS = {
    "steady": cmd_steady,
    "sweep": cmd_sweep,
    "currents": cmd_currents,
    "g2": cmd_g2,
    "traj": cmd_traj,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        if args.command == "analytic":
            cmd_analytic(cfg, args.which)
        else:
            COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except SubradiantError as exc:
        print(f"subradiant: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
