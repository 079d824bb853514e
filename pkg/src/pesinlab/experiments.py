"""Monte Carlo and tabulation experiments behind the CLI subcommands.

Work is split into fixed-size blocks of sample points.  Each block draws from
its own stream derived from (seed, block index), and block results are merged
in index order, so outputs do not depend on the worker count.  Workers rebuild
the system from its spec; only plain data crosses process boundaries.
"""
from __future__ import annotations

import json
import math
import warnings
from functools import lru_cache

import numpy as np

from .builders import build_from_config, build_reference_affine
from .cantor import cantor_total_measure
from .entropy import (
    atom_mass_decay,
    distortion_ratio,
    merge_counts,
    pesin_defect,
    symbol_block,
    table_from_counts,
    window_counts,
)
from .errors import AllZeroFractions, ConfigError, WordTooLong
from .measures import (
    ObservableFamily,
    dirac,
    empirical_from_orbit,
    family_integrals,
    lebesgue,
    mu_K,
    product_measure,
)
from .parallel import run_parallel
from .piecewise_map import reduce_circle


@lru_cache(maxsize=16)
def _system(spec_json):
    return build_from_config(json.loads(spec_json))


def system_from_spec(spec):
    return _system(json.dumps(spec, sort_keys=True))


def _blocks(total, block):
    sizes = [block] * (total // block)
    if total % block:
        sizes.append(total % block)
    return sizes


def sample_lebesgue(rng, count, torus=False):
    return rng.uniform(-1.0, 1.0, (count, 2) if torus else count)


# -- entropy statistics -------------------------------------------------------------


def _entropy_worker(item, rng):
    spec, n_max, count, orbit_len, noise, burn_in = item
    system = system_from_spec(spec)
    x0 = sample_lebesgue(rng, count, system.is_torus)
    sym, logd = symbol_block(system, x0, orbit_len, noise, rng, burn_in)
    a = system.map.alphabet_size
    counts = [window_counts(sym, n, a) for n in range(1, n_max + 1)]
    return counts, math.fsum(logd.ravel()), logd.size


def empirical_entropy_stats(system, n_max, n_orbits, orbit_len, seed, noise=1e-12,
                            workers=1, block=250, burn_in=0):
    """Cylinder tables n = 1..n_max and the Birkhoff Lyapunov mean from Lebesgue-random orbits."""
    items = [(system.spec, n_max, c, orbit_len, noise, burn_in) for c in _blocks(n_orbits, block)]
    parts = run_parallel(items, _entropy_worker, seed, workers)
    a = system.map.alphabet_size
    tables, caught = [], []
    for n in range(1, n_max + 1):
        codes, counts = merge_counts([p[0][n - 1] for p in parts])
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            tables.append(table_from_counts(n, a, codes, counts))
        caught.extend(str(r.message) for r in rec)
    total = sum(p[2] for p in parts)
    birk = math.fsum(p[1] for p in parts) / total
    return {"tables": tables, "birkhoff": birk, "warnings": caught}


# -- running weak* distances along orbits ------------------------------------------


def _dist_worker(item, rng):
    """Counts of sample points whose sigma_n is within each epsilon of each target."""
    spec, count, times, targets, epsilons, noise, n_terms = item
    system = system_from_spec(spec)
    fam = ObservableFamily(system, n_terms)
    torus = system.is_torus
    x = sample_lebesgue(rng, count, torus)
    sums = np.zeros((count, n_terms))
    targets = np.asarray(targets)  # (n_targets, n_terms)
    eps = np.asarray(epsilons)
    hits = np.zeros((len(times), len(targets), len(eps)), dtype=np.int64)
    schedule = {n: i for i, n in enumerate(times)}
    for j in range(1, max(times) + 1):
        y, logd, _ = system.map.step_array(x)
        if not torus:
            logd = np.log(logd)
        sums[:, 0] -= logd
        sums[:, 1:] += fam.values(x)
        if j in schedule:
            avg = sums / j
            for t, tgt in enumerate(targets):
                d = np.abs(avg - tgt) @ fam.weights
                hits[schedule[j], t] = (d[:, None] < eps[None, :]).sum(axis=0)
        if noise:
            y = reduce_circle(y + noise * rng.uniform(-1.0, 1.0, y.shape))
        x = y
    return hits


def distance_hits(system, targets, times, epsilons, n_points, seed, noise=1e-12,
                  workers=1, block=10000, n_terms=33):
    """Fraction of Lebesgue-random x with dist*(sigma_n(x), target) < eps.

    Returns hit counts of shape (len(times), len(targets), len(epsilons)).
    """
    fam = ObservableFamily(system, n_terms)
    tvals = [family_integrals(t, fam)[0].tolist() for t in targets]
    items = [(system.spec, c, tuple(times), tvals, tuple(epsilons), noise, n_terms)
             for c in _blocks(n_points, block)]
    parts = run_parallel(items, _dist_worker, seed, workers)
    total = parts[0].copy()
    for p in parts[1:]:
        total += p
    return total


def basin_scan(system, candidates, times, epsilons, n_points=10000, seed=0, noise=1e-12,
               workers=1, block=2000):
    """Rows (n, eps, candidate, fraction): finite-time proxies for weak-basin sizes."""
    names = [c[0] for c in candidates]
    hits = distance_hits(system, [c[1] for c in candidates], times, epsilons, n_points,
                         seed, noise, workers, block)
    rows = []
    for i, n in enumerate(times):
        for e_i, eps in enumerate(epsilons):
            for c_i, name in enumerate(names):
                h = int(hits[i, c_i, e_i])
                p = h / n_points
                half = 1.96 * math.sqrt(max(p * (1 - p), 0.0) / n_points)
                rows.append({"n": n, "epsilon": eps, "candidate": name, "hits": h,
                             "fraction": p, "ci_low": max(0.0, p - half),
                             "ci_high": min(1.0, p + half)})
    return rows


def fit_decay(times, hits, n_points, min_hits=10):
    """Weighted least squares of log(fraction) on n over rows with enough hits."""
    times = np.asarray(times, dtype=float)
    hits = np.asarray(hits, dtype=float)
    keep = hits >= min_hits
    if not keep.any():
        raise AllZeroFractions("no schedule row reached the minimum hit count")
    if keep.sum() < 2:
        raise AllZeroFractions("fewer than two usable rows for a fit")
    n, h = times[keep], hits[keep]
    y = np.log(h / n_points)
    w = h
    X = np.column_stack([np.ones_like(n), n])
    W = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * W[:, None], y * W, rcond=None)
    pred = X @ coef
    ybar = np.average(y, weights=w)
    ss_res = float(np.sum(w * (y - pred) ** 2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return {"rate": float(-coef[1]), "intercept": float(coef[0]), "r2": r2,
            "rows_used": int(keep.sum()), "censored_n": times[~keep].astype(int).tolist()}


def decay_rate(system, target_name, target, r, times, epsilon=0.05, n_points=10**6, seed=0,
               noise=1e-12, workers=1, block=10000, min_hits=10):
    """Monte Carlo decay of m(C_n)/2 for C_n = {x : dist*(sigma_n(x), target) < epsilon}."""
    hits = distance_hits(system, [target], times, [epsilon], n_points, seed, noise,
                         workers, block)[:, 0, 0]
    rows = [{"n": n, "hits": int(h), "fraction": int(h) / n_points,
             "censored": bool(h < min_hits)} for n, h in zip(times, hits)]
    fracs = [row["fraction"] for row in rows]
    report = {"target": target_name, "epsilon": epsilon, "n_points": n_points, "r": r,
              "ceiling": r / 2.0,
              "strictly_decreasing": all(b < a for a, b in zip(fracs, fracs[1:])),
              "warnings": []}
    try:
        fit = fit_decay(times, hits, n_points, min_hits)
        report.update(fit)
        ratio = fit["rate"] / (r / 2.0) if r > 0 else float("nan")
        report["rate_over_ceiling"] = ratio
        # the bound says mass decays at least like exp(-n r / 2), so rate >= r/2 is consistent
        report["consistent_with_bound"] = bool(r > 0 and fit["rate"] >= r / 2.0)
    except AllZeroFractions as exc:
        report["warnings"].append(f"fit skipped: {exc}")
        report.update({"rate": None, "r2": None, "rate_over_ceiling": None,
                       "consistent_with_bound": None})
    return rows, report


# -- deterministic tabulations ------------------------------------------------------


def _gap_length(system, skel, n):
    if n < skel.N:
        return float(skel.gamma[n])
    if skel.params is not None:
        return skel.params.alpha(n) / 2.0 ** n
    if system.kind == "affine3":
        return 2.0 / 3.0 ** (n + 1)
    return float("nan")


def cantor_report(system):
    """Rows (label, generation, L_n, m_A_n, alpha_n, gap_len) plus limiting totals."""
    if system.is_torus:
        raise ConfigError("cantor-report takes a circle map")
    if not system.skeletons:
        raise ConfigError(f"{system.kind} has no Cantor skeleton")
    rows, totals = [], {}
    for label, skel in system.skeletons.items():
        for n in range(1, skel.N + 1):
            gap = _gap_length(system, skel, n)
            rows.append({"skeleton": label, "generation": n, "L_n": float(skel.L[n]),
                         "m_A_n": skel.mass(n), "alpha_n": math.ldexp(gap, n), "gap_len": gap})
        if skel.params is not None:
            value, tail = cantor_total_measure(skel.params)
        else:
            value, tail = 0.0, 0.0
        totals[label] = {"total_measure": value, "tail_bound": tail}
    return rows, totals


def distortion_table(system, generations):
    """Side-by-side distortion and atom masses for the system and the affine reference."""
    systems = [system] if system.kind == "affine3" else [build_reference_affine(), system]
    rows = []
    for sysm in systems:
        if sysm.is_torus or not sysm.skeletons:
            raise ConfigError(f"distortion needs a circle map with a skeleton, got {sysm.kind}")
        for label, skel in sysm.skeletons.items():
            if generations > skel.N:
                raise WordTooLong(f"generations {generations} exceed skeleton N={skel.N}")
            masses = atom_mass_decay(sysm, generations, label)
            for n in range(1, generations + 1):
                d = distortion_ratio(sysm, (0,) * n, label)
                rows.append({"system": sysm.kind, "skeleton": label, "n": n,
                             "inf_deriv": d.inf_deriv, "sup_deriv": d.sup_deriv,
                             "ratio": d.ratio, "m_A_n": masses[n]})
    return rows


# -- measure specs ------------------------------------------------------------------


def measure_from_spec(system, spec):
    """Build a measure from a config descriptor; returns (name, measure)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("measure spec must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "lebesgue":
        return "lebesgue", lebesgue(system)
    if kind == "dirac":
        pt = spec.get("point", [-1.0, -1.0] if system.is_torus else 0.0)
        if system.is_torus != isinstance(pt, (list, tuple)):
            raise ConfigError(f"dirac point {pt!r} does not match the {system.kind} space")
        return f"dirac({pt})", dirac(pt)
    if kind == "mu_K":
        label = spec.get("skeleton_label")
        if system.is_torus:
            label = tuple(label) if label is not None else system.product_labels[0]
            if label not in system.product_labels:
                raise ConfigError(f"unknown product skeleton {label}; have {system.product_labels}")
        elif label is not None and label not in system.skeletons:
            raise ConfigError(f"unknown skeleton label {label!r}; have {list(system.skeletons)}")
        elif label is None and not system.skeletons:
            raise ConfigError(f"{system.kind} has no Cantor skeleton for mu_K")
        m = mu_K(system, label, spec.get("depth"))
        name = "mu_" + ("x".join(label) if isinstance(label, tuple) else (label or m.label))
        return name, m
    if kind == "empirical":
        if system.is_torus:
            raise ConfigError("empirical orbit measures are circle-only in configs")
        x0, n = float(spec.get("x0", 0.0)), int(spec.get("n", 1000))
        return f"sigma_{n}({x0})", empirical_from_orbit(system.map, x0, n)
    if kind == "product":
        if not system.is_torus:
            raise ConfigError("product measures need a torus map")
        f1, f2 = system.factors
        n1, m1 = measure_from_spec(f1, spec["left"])
        n2, m2 = measure_from_spec(f2, spec["right"])
        return f"{n1}x{n2}", product_measure(m1, m2)
    raise ConfigError(f"unknown measure kind {kind!r}")


def measure_defect(system, measure, **opts):
    """r = -(h + integral of psi): how far a measure is from satisfying the entropy formula."""
    return pesin_defect(system, measure, **opts).defect

