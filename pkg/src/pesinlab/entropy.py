"""Partition entropy, cylinder tables, entropy rates, Lyapunov integrals and the Pesin defect.

Entropies are accumulated in bits and converted to nats once at the end, so
dyadic cylinder masses give results that are exact multiples of log 2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DepthExceeded, UndersampledWarning, UnsupportedVariant, WordTooLong
from .measures import (
    CantorBernoulli,
    Dirac,
    Empirical,
    LebesgueUniform,
    ObservableFamily,
    Product,
    integrate,
    log_deriv_observable,
    pushforward,
    weak_star_dist,
)
from .piecewise_map import orbit_block, torus_orbit_block

LN2 = math.log(2.0)


def _entropy_bits(masses):
    p = np.asarray(masses, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def partition_entropy(masses):
    """-sum p log p in nats, with 0 log 0 = 0."""
    return _entropy_bits(masses) * LN2


@dataclass
class CylinderTable:
    """Masses of the itinerary words of length n (codes in base ``alphabet``)."""

    n: int
    alphabet: int
    codes: np.ndarray
    masses: np.ndarray
    n_samples: int | None = None  # None for exact symbolic tables

    @property
    def symbolic(self):
        return self.n_samples is None

    @property
    def entropy_bits(self):
        return _entropy_bits(self.masses)

    @property
    def entropy(self):
        return self.entropy_bits * LN2

    def as_dict(self):
        out = {}
        for c, m in zip(self.codes.tolist(), self.masses.tolist()):
            digits = []
            for _ in range(self.n):
                c, r = divmod(c, self.alphabet)
                digits.append(r)
            out[tuple(reversed(digits))] = m
        return out


def _bit_matrix(n):
    i = np.arange(2 ** n, dtype=np.int64)[:, None]
    return (i >> np.arange(n - 1, -1, -1)) & 1


def _codes(sym, alphabet):
    out = np.zeros(sym.shape[:-1], dtype=np.int64)
    for j in range(sym.shape[-1]):
        out = out * alphabet + sym[..., j]
    return out


def _cantor_symbols(measure, n):
    if n < 1:
        raise ValueError("word length must be >= 1")
    if n > measure.depth:
        raise DepthExceeded(f"word length {n} exceeds measure depth {measure.depth}")
    bits = _bit_matrix(n)
    sym = np.where(bits == 1, measure.bit_symbols[1], measure.bit_symbols[0])
    return sym, measure.marginal(n).masses()


def cylinder_table_symbolic(measure, n, alphabet=None):
    """Exact cylinder masses of a Cantor-Bernoulli measure (or a product of two)."""
    if isinstance(measure, CantorBernoulli):
        sym, w = _cantor_symbols(measure, n)
        a = alphabet or int(max(measure.bit_symbols)) + 1
        return CylinderTable(n, a, _codes(sym, a), w)
    if isinstance(measure, Product) and isinstance(measure.left, CantorBernoulli) \
            and isinstance(measure.right, CantorBernoulli):
        s1, w1 = _cantor_symbols(measure.left, n)
        s2, w2 = _cantor_symbols(measure.right, n)
        if alphabet is None:
            a1, a2 = int(max(measure.left.bit_symbols)) + 1, int(max(measure.right.bit_symbols)) + 1
        else:
            a1, a2 = alphabet
        sym = s1[:, None, :] * a2 + s2[None, :, :]
        masses = (w1[:, None] * w2[None, :]).ravel()
        return CylinderTable(n, a1 * a2, _codes(sym, a1 * a2).ravel(), masses)
    raise UnsupportedVariant(f"no symbolic cylinder structure for {type(measure).__name__}")


def window_counts(sym, n, alphabet):
    """Codes and counts of all length-n sliding windows of each row of ``sym``."""
    m, t = sym.shape
    if n > t:
        raise WordTooLong(f"window {n} longer than orbit {t}")
    codes = np.zeros((m, t - n + 1), dtype=np.int64)
    for j in range(n):
        codes = codes * alphabet + sym[:, j:t - n + 1 + j]
    return np.unique(codes, return_counts=True)


def merge_counts(parts):
    """Deterministically merge (codes, counts) pairs."""
    codes = np.concatenate([c for c, _ in parts])
    counts = np.concatenate([k for _, k in parts])
    uniq, inv = np.unique(codes, return_inverse=True)
    return uniq, np.bincount(inv, weights=counts).astype(np.int64)


def table_from_counts(n, alphabet, codes, counts):
    total = int(counts.sum())
    if len(codes) > total / 10:
        warnings.warn(f"{len(codes)} distinct words of length {n} from {total} windows",
                      UndersampledWarning, stacklevel=2)
    return CylinderTable(n, alphabet, codes, counts / total, total)


def symbol_block(system, x0, orbit_len, noise=0.0, rng=None, burn_in=0):
    """Symbols and log-derivatives of pseudo-orbits started at ``x0`` (after burn-in)."""
    orbit_fn = torus_orbit_block if system.is_torus else orbit_block
    if burn_in:
        pts, _, _ = orbit_fn(system.map, x0, burn_in + 1, noise, rng)
        x0 = pts[:, -1]
    _, logd, sym = orbit_fn(system.map, x0, orbit_len, noise, rng)
    return sym, logd


def cylinder_table_empirical(system, x0, orbit_len, n, noise=0.0, rng=None):
    """Sliding-window word frequencies over the itineraries of orbits from ``x0``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if system.is_torus:
        x0 = x0.reshape(-1, 2)
    sym, _ = symbol_block(system, x0, orbit_len, noise, rng)
    codes, counts = window_counts(sym, n, system.map.alphabet_size)
    return table_from_counts(n, system.map.alphabet_size, codes, counts)


@dataclass
class EntropyRate:
    h_final: float
    h_sequence: list
    increments: list
    method: str


def entropy_rate(tables):
    """min_n H(n)/n; empirical tables also use the last increment H(n) - H(n-1)."""
    tables = sorted(tables, key=lambda t: t.n)
    hb = [t.entropy_bits for t in tables]
    rates = [h / t.n for h, t in zip(hb, tables)]
    incs = [hb[i] - hb[i - 1] for i in range(1, len(hb)) if tables[i].n == tables[i - 1].n + 1]
    best = min(rates)
    symbolic = all(t.symbolic for t in tables)
    if not symbolic and incs:
        best = min(best, incs[-1])
    return EntropyRate(best * LN2, [r * LN2 for r in rates], [i * LN2 for i in incs],
                       "symbolic" if symbolic else "empirical")


def lyapunov_integral(system, measure):
    """(value, error_bound) of the integral of log|det Df| against ``measure``."""
    return integrate(measure, log_deriv_observable(system))


def birkhoff_lyapunov(system, x0, n):
    """(1/n) sum of log|det Df| along the first n orbit points (compensated sum)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    fmap = system.map
    terms = []
    x = x0
    for _ in range(n):
        if system.is_torus:
            terms.append(fmap.log_det(x))
        else:
            terms.append(math.log(fmap.deriv(x)))
        x = fmap(x)
    return math.fsum(terms) / n


@dataclass
class PesinReport:
    system: str
    measure: str
    method: str
    h_sequence: list
    increments: list
    h_final: float
    lyap: float
    lyap_error: float
    defect: float
    pressure: float
    invariance_residual: float | None
    ruelle_tol: float
    ruelle_ok: bool
    warnings: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def as_dict(self):
        return dict(self.__dict__)


GENERATOR_NOTE = ("entropy from the natural branch partition; cylinder diameters shrink like "
                  "lambda^-n, so it generates")


def describe(measure):
    if isinstance(measure, CantorBernoulli):
        return f"mu_{measure.label}"
    if isinstance(measure, Product):
        return f"{describe(measure.left)}x{describe(measure.right)}"
    if isinstance(measure, Dirac):
        return f"dirac{measure.point}"
    if isinstance(measure, LebesgueUniform):
        return "lebesgue"
    return "empirical"


def _is_lebesgue(measure):
    if isinstance(measure, LebesgueUniform):
        return True
    return isinstance(measure, Product) and all(
        isinstance(m, LebesgueUniform) for m in (measure.left, measure.right))


def _is_cantor(measure):
    if isinstance(measure, CantorBernoulli):
        return True
    return isinstance(measure, Product) and all(
        isinstance(m, CantorBernoulli) for m in (measure.left, measure.right))


def pesin_defect(system, measure, n_max=None, n_orbits=1000, orbit_len=1000,
                 seed=0, noise=1e-12, workers=1, block=250, burn_in=0, family=None):
    """Defect = Lyapunov integral - entropy, with a Ruelle-inequality check.

    Cantor-Bernoulli measures use exact symbolic tables.  Lebesgue uses
    Lebesgue-random pseudo-orbits; if Lebesgue is not invariant for the system,
    the Lyapunov side is the Birkhoff average along the same orbits (a proxy for
    the measures those orbits settle on) and a warning says so.
    """
    family = family or ObservableFamily(system)
    notes = [GENERATOR_NOTE]
    warns = []
    residual = None
    if _is_cantor(measure):
        depth = min(measure.depth if isinstance(measure, CantorBernoulli)
                    else min(measure.left.depth, measure.right.depth), 30)
        cap = 8 if isinstance(measure, Product) else 16
        n_max = min(n_max or cap, depth)
        alphabet = None
        if system.is_torus:
            alphabet = (system.map.f1.alphabet_size, system.map.f2.alphabet_size)
        else:
            alphabet = system.map.alphabet_size
        tables = [cylinder_table_symbolic(measure, n, alphabet) for n in range(1, n_max + 1)]
        rate = entropy_rate(tables)
        lyap, lyap_err = lyapunov_integral(system, measure)
        pushed = pushforward(system.map, measure)
        residual = weak_star_dist(pushed, measure, family)[0]
        tol = 1e-9
    elif isinstance(measure, Dirac):
        rate = EntropyRate(0.0, [0.0], [], "dirac")
        if system.is_torus:
            lyap = system.map.log_det(measure.point)
        else:
            lyap = math.log(system.map.deriv(measure.point))
        lyap_err = 0.0
        residual = weak_star_dist(pushforward(system.map, measure), measure, family)[0]
        tol = 1e-9
        if residual > 0:
            warns.append("Dirac point is not fixed; the measure is not invariant")
    elif _is_lebesgue(measure):
        from .experiments import empirical_entropy_stats

        n_max = n_max or 12
        stats = empirical_entropy_stats(system, n_max, n_orbits, orbit_len, seed,
                                        noise=noise, workers=workers, block=block,
                                        burn_in=burn_in)
        tables = [t for t in stats["tables"] if len(t.codes) <= t.n_samples / 10]
        dropped = [t.n for t in stats["tables"] if len(t.codes) > t.n_samples / 10]
        if dropped:
            notes.append(f"word lengths {dropped} undersampled; left out of the entropy rate")
        rate = entropy_rate(tables or stats["tables"][:1])
        if system.lebesgue_invariant:
            lyap, lyap_err = lyapunov_integral(system, measure)
        else:
            lyap, lyap_err = stats["birkhoff"], 0.0
            warns.append("Lebesgue is not invariant for this map; entropy and Lyapunov "
                         "are taken along Lebesgue-typical pseudo-orbits")
        notes.append(f"{n_orbits} pseudo-orbits of length {orbit_len}, noise {noise}")
        tol = 0.02
    else:
        raise UnsupportedVariant(f"no Pesin check for {type(measure).__name__}")
    defect = lyap - rate.h_final
    ok = defect >= -tol
    if not ok:
        warns.append(f"Ruelle inequality violated beyond tolerance: defect {defect}")
    return PesinReport(system.kind, describe(measure), rate.method, rate.h_sequence,
                       rate.increments, rate.h_final, lyap, lyap_err, defect, 0.0 - defect,
                       residual, tol, ok, warns, notes)


def atom_mass_decay(system, n_max, label=None):
    """m(A_n) for n = 0..n_max from the skeleton recursion (exact for the affine case)."""
    skel = system.skeleton(label if label is not None else next(iter(system.skeletons)))
    if n_max > skel.N:
        raise DepthExceeded(f"n_max {n_max} exceeds skeleton N={skel.N}")
    return [skel.mass(n) for n in range(n_max + 1)]


@dataclass
class Distortion:
    inf_deriv: float
    sup_deriv: float

    @property
    def ratio(self):
        return self.sup_deriv / self.inf_deriv


def distortion_ratio(system, word, label=None):
    """sup/inf of (G^n)' over the atom ``word`` for the skeleton's expanding branches.

    On a Bowen skeleton (G^n)' = 2^n on the Cantor set.  Points of a gap of
    generation k >= n pass through gaps k, k-1, ..., k-n+1, and gap midpoints map
    to gap midpoints where each profile peaks, so the sup over gap points is the
    largest product of n consecutive class maxima.  Below the skeleton
    resolution the slope is 2, so the result is the exact sup on the resolved part.
    """
    from .cantor import as_bits

    bits = as_bits(word)
    n = len(bits)
    label = label if label is not None else next(iter(system.skeletons))
    skel = system.skeleton(label)
    if n > skel.N:
        raise WordTooLong(f"word length {n} exceeds skeleton N={skel.N}")
    if n == 0:
        return Distortion(1.0, 1.0)
    if label not in system.bowen:
        slope = system.map.deriv(skel.lo)  # affine reference: constant slope
        d = slope ** n
        return Distortion(d, d)
    branch = system.bowen[label][0]
    cm = [branch.class_max(k) for k in range(1, skel.N)]  # cm[k-1] for generation k
    best = 0.0
    for k in range(n, skel.N):
        prod = 1.0
        for i in range(n):
            prod *= cm[k - i - 1]
        best = max(best, prod)
    return Distortion(math.ldexp(1.0, n), max(best, math.ldexp(1.0, n)))
