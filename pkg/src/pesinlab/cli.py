"""Command-line entry point: ``pesinlab <subcommand> --config cfg.json``.

Exit codes: 0 success, 2 validation or config failure, 3 experiment infeasible.
Output files hold only deterministic content; timing goes to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .builders import build_from_config, gap_image_check
from .entropy import pesin_defect
from .errors import (
    ConfigError,
    ConstructionError,
    PesinLabError,
    ValidationError,
)
from .experiments import (
    basin_scan,
    cantor_report,
    decay_rate,
    distortion_table,
    measure_from_spec,
)
from .piecewise_map import validate_circle_map

SUBCOMMANDS = ("validate", "cantor-report", "pesin-check", "basin-scan", "decay-rate",
               "distortion")
TOP_KEYS = {"map", "measures", "experiment", "rng", "workers", "output"}


def _clean(obj):
    """JSON-safe copy: tuples to lists, non-finite floats to None."""
    if hasattr(obj, "item"):
        return _clean(obj.item())
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _cell(v):
    if v is None:
        return ""
    if hasattr(v, "item"):
        return _cell(v.item())
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def to_csv(rows):
    if not rows:
        return ""
    cols = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in cols])
    return buf.getvalue()


def load_config(path):
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(cfg) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    if "map" not in cfg:
        raise ConfigError("config needs a 'map' block")
    return cfg


def resolve_seed(args, cfg):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PESINLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"PESINLAB_SEED must be an integer, got {env!r}") from None
    seed = cfg.get("rng", {}).get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"rng.seed must be a 64-bit nonnegative integer, got {seed!r}")
    return seed


def _exp(cfg, key, default, kind=None):
    val = cfg.get("experiment", {}).get(key, default)
    if kind is int and (not isinstance(val, int) or isinstance(val, bool) or val < 1):
        raise ConfigError(f"experiment.{key} must be a positive integer, got {val!r}")
    if kind is float and (not isinstance(val, (int, float)) or isinstance(val, bool) or val < 0):
        raise ConfigError(f"experiment.{key} must be a nonnegative number, got {val!r}")
    if kind is list and (not isinstance(val, list) or not val):
        raise ConfigError(f"experiment.{key} must be a non-empty list, got {val!r}")
    return val


def _times(cfg, default):
    times = _exp(cfg, "times", default, list)
    if any(not isinstance(t, int) or isinstance(t, bool) or t < 1 for t in times) \
            or sorted(set(times)) != times:
        raise ConfigError(f"experiment.times must be increasing positive integers, got {times}")
    return times


def _measures(system, cfg):
    specs = cfg.get("measures", [{"kind": "lebesgue"}])
    if not isinstance(specs, list) or not specs:
        raise ConfigError("measures must be a non-empty list")
    return [measure_from_spec(system, s) for s in specs]


# -- subcommands ---------------------------------------------------------------------


def cmd_validate(system, cfg, seed, workers):
    maps = [system.map.f1, system.map.f2] if system.is_torus else [system.map]
    tol = _exp(cfg, "tol", 1e-9, float)
    rows = []
    for i, fmap in enumerate(maps):
        rep = validate_circle_map(fmap, tol=tol)
        rows.append({"factor": i, "map": fmap.name, **rep.as_dict()})
    gap = gap_image_check(system, _exp(cfg, "max_gen", 10, int), _exp(cfg, "gap_tol", 1e-12, float))
    for row in rows:
        row["gap_residual"] = gap["max_residual"]
        row["gap_checks"] = gap["n_checked"]
    return rows, {"status": "pass", "gap_image": gap}


def cmd_cantor_report(system, cfg, seed, workers):
    rows, totals = cantor_report(system)
    return rows, {"totals": totals}


def cmd_pesin_check(system, cfg, seed, workers):
    opts = {
        "n_orbits": _exp(cfg, "n_orbits", 1000, int),
        "orbit_len": _exp(cfg, "orbit_len", 1000, int),
        "noise": _exp(cfg, "noise", 1e-12, float),
        "burn_in": cfg.get("experiment", {}).get("burn_in", 0),
    }
    n_max = cfg.get("experiment", {}).get("n_max")
    rows, reports = [], []
    for name, m in _measures(system, cfg):
        rep = pesin_defect(system, m, n_max=n_max, seed=seed, workers=workers, **opts)
        d = rep.as_dict()
        d["measure"] = name
        reports.append(d)
        rows.append({"system": rep.system, "measure": name, "method": rep.method,
                     "h_final": rep.h_final, "lyap": rep.lyap, "defect": rep.defect,
                     "pressure": rep.pressure, "invariance_residual": rep.invariance_residual,
                     "ruelle_ok": rep.ruelle_ok})
    return rows, {"reports": reports}


def cmd_basin_scan(system, cfg, seed, workers):
    exp = cfg.get("experiment", {})
    cand_specs = exp.get("candidates", cfg.get("measures", [{"kind": "lebesgue"}]))
    if not isinstance(cand_specs, list) or not cand_specs:
        raise ConfigError("experiment.candidates must be a non-empty list of measures")
    candidates = [measure_from_spec(system, s) for s in cand_specs]
    rows = basin_scan(system, candidates, _times(cfg, [10, 100, 1000]),
                      _exp(cfg, "epsilons", [0.01, 0.05, 0.1], list),
                      _exp(cfg, "n_points", 10000, int), seed,
                      _exp(cfg, "noise", 1e-12, float), workers,
                      _exp(cfg, "block", 2000, int))
    return rows, {"note": "fractions are finite-time proxies for epsilon-weak basins"}


def cmd_decay_rate(system, cfg, seed, workers):
    exp = cfg.get("experiment", {})
    target_spec = exp.get("target", {"kind": "dirac", "point": 0.0})
    name, target = measure_from_spec(system, target_spec)
    r = exp.get("r")
    if r is None:
        r = pesin_defect(system, target, seed=seed, workers=workers).defect
    rows, report = decay_rate(system, name, target, r, _times(cfg, list(range(4, 21, 2))),
                              _exp(cfg, "epsilon", 0.05, float),
                              _exp(cfg, "n_points", 10 ** 6, int), seed,
                              _exp(cfg, "noise", 1e-12, float), workers,
                              _exp(cfg, "block", 10000, int), _exp(cfg, "min_hits", 10, int))
    return rows, {"fit": report}


def cmd_distortion(system, cfg, seed, workers):
    return distortion_table(system, _exp(cfg, "generations", 12, int)), {}


COMMANDS = {
    "validate": cmd_validate,
    "cantor-report": cmd_cantor_report,
    "pesin-check": cmd_pesin_check,
    "basin-scan": cmd_basin_scan,
    "decay-rate": cmd_decay_rate,
    "distortion": cmd_distortion,
}


def write_outputs(out_dir, name, fmt, payload, rows):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    stem = name.replace("-", "_")
    if fmt in ("json", "both"):
        p = out_dir / f"{stem}.json"
        p.write_text(json.dumps(_clean(payload), indent=2, allow_nan=False) + "\n",
                     encoding="utf-8", newline="\n")
        written.append(p)
    if fmt in ("csv", "both"):
        p = out_dir / f"{stem}.csv"
        p.write_text(to_csv(rows), encoding="utf-8", newline="\n")
        written.append(p)
    return written


def build_parser():
    ap = argparse.ArgumentParser(prog="pesinlab", description="Expanding-map entropy lab.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="JSON config path")
    ap.add_argument("--seed", type=int, default=None, help="overrides PESINLAB_SEED and rng.seed")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--format", choices=("csv", "json", "both"), default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        seed = resolve_seed(args, cfg)
        workers = args.workers if args.workers is not None else cfg.get("workers", 1)
        if not isinstance(workers, int) or workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {workers!r}")
        out_cfg = cfg.get("output", {})
        out_dir = args.out or out_cfg.get("dir", "pesinlab_out")
        fmt = args.format or out_cfg.get("format", "both")
        if fmt not in ("csv", "json", "both"):
            raise ConfigError(f"output.format must be csv, json or both, got {fmt!r}")
        system = build_from_config(cfg["map"])
    except (ConfigError, ConstructionError, ValidationError) as exc:
        print(f"pesinlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    try:
        rows, extra = COMMANDS[args.subcommand](system, cfg, seed, workers)
    except (ConfigError, ConstructionError, ValidationError) as exc:
        print(f"pesinlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.subcommand == "validate" and getattr(exc, "report", None) is not None:
            print(json.dumps(_clean(exc.report.as_dict())), file=sys.stderr)
        return 2
    except PesinLabError as exc:
        print(f"pesinlab: experiment infeasible: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    payload = {"experiment": args.subcommand, "version": __version__, "seed": seed,
               "inputs": cfg, "rows": rows, **extra}
    for p in write_outputs(out_dir, args.subcommand, fmt, payload, rows):
        print(f"wrote {p}", file=sys.stderr)
    print(f"{args.subcommand} finished in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
