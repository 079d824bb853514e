"""Dynamically defined Cantor sets with centred gaps.

Generation-0 atom is the ambient interval [lo, hi]; every atom of generation n
has length ``L[n]`` and loses a centred open gap of length ``gamma[n]``, leaving
two children of length ``L[n+1] = (L[n] - gamma[n]) / 2``.  Atoms are addressed
by binary words and never materialised: each query descends from the ambient
interval using ``step[n] = L[n] - L[n+1]``, so left child, gap and right child
share their endpoint floats and tile the parent exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    GapOverflow,
    GapRatioError,
    ParamsInfeasible,
    WordTooLong,
)
from .piecewise_map import MonotonePiece, _profile_coeff, profile_extrema

ZETA2 = math.pi ** 2 / 6.0


def as_bits(word):
    """Normalise '0110', (0, 1, 1, 0) or a numpy array into a tuple of ints."""
    if isinstance(word, str):
        bits = tuple(int(c) for c in word)
    else:
        bits = tuple(int(b) for b in word)
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"word must be binary, got {word!r}")
    return bits


@dataclass(frozen=True)
class BowenParams:
    """Centred-gap schedule: generation-0 gap (c - b0, c + b0), then alpha_n / 2^n.

    Either ``k`` (alpha_n = 1/(k n^2)) or an explicit ``alphas`` list
    (alpha_1, alpha_2, ...) must be given.
    """

    lo: float = -1.0
    hi: float = 1.0
    b0: float = 0.25
    k: float | None = 4.0
    alphas: tuple | None = None
    N: int = 24

    def alpha(self, n):
        if self.alphas is not None:
            return float(self.alphas[n - 1])
        return 1.0 / (self.k * n * n)

    @property
    def atom1_length(self):
        return ((self.hi - self.lo) - 2.0 * self.b0) / 2.0

    def alpha_sum(self):
        """Sum of the whole schedule (infinite for closed form)."""
        if self.alphas is not None:
            return math.fsum(self.alphas)
        return ZETA2 / self.k


@dataclass
class ParamsReport:
    alpha_sum: float
    mass_budget: float
    tail_ratios: tuple
    tail_ratio_ok: bool


def check_params(params):
    """Validate the Bowen inequalities; returns a report with the tail-ratio heuristic."""
    p = params
    if not p.lo < p.hi:
        raise ParamsInfeasible(f"ambient interval [{p.lo}, {p.hi}] is empty")
    if p.N < 1:
        raise ParamsInfeasible("max generation N must be >= 1")
    if not 0.0 < p.b0 < (p.hi - p.lo) / 2.0:
        raise ParamsInfeasible(f"need 0 < b0 < half the ambient length, got b0={p.b0}")
    if p.alphas is None:
        if p.k is None or not p.k > 0:
            raise ParamsInfeasible("closed-form schedule needs k > 0")
    else:
        if len(p.alphas) < p.N - 1:
            raise ParamsInfeasible(f"explicit schedule needs at least N-1={p.N - 1} entries")
        if any(not a > 0 for a in p.alphas):
            raise ParamsInfeasible("alpha_n must be positive")
        for n in range(1, len(p.alphas)):
            if not p.alphas[n] < p.alphas[n - 1]:
                raise ParamsInfeasible(
                    f"alpha_n not decreasing: alpha_{n + 1}={p.alphas[n]} >= alpha_{n}={p.alphas[n - 1]}")
    budget = 2.0 * p.atom1_length
    total = p.alpha_sum()
    if not total < budget:
        raise ParamsInfeasible(
            f"sum of alpha_n < 2 (atom-1 length) violated: {total:.6g} >= {budget:.6g}")
    if not p.alpha(1) < 2.0 * p.b0:
        raise ParamsInfeasible(
            f"alpha_1 < 2 b0 violated: alpha_1={p.alpha(1):.6g}, 2 b0={2 * p.b0:.6g}")
    if p.alphas is None:
        ratios, ok = (), True
    else:
        a = p.alphas
        ratios = tuple(a[i + 1] / a[i] for i in range(max(0, len(a) - 11), len(a) - 1))
        ok = all(r > 0.9 for r in ratios)
    return ParamsReport(total, budget, ratios, ok)


class CantorSkeleton:
    """Per-generation lengths of a centred-gap Cantor construction.

    ``gaps[n]`` is the gap length removed at generation n (n = 0..N-1).  With
    ``Fraction`` inputs the lengths are also kept exactly for mass accounting.
    """

    def __init__(self, lo, hi, gaps, params=None, report=None):
        self.lo, self.hi = float(lo), float(hi)
        self.params = params
        self.report = report
        self.N = len(gaps)
        exact = all(isinstance(g, Fraction) for g in gaps) and isinstance(lo, (int, Fraction)) \
            and isinstance(hi, (int, Fraction))
        L = [Fraction(hi) - Fraction(lo) if exact else self.hi - self.lo]
        for n, g in enumerate(gaps):
            if not g < L[n]:
                raise GapOverflow(f"generation-{n} gap {float(g):.6g} >= atom length {float(L[n]):.6g}")
            L.append((L[n] - g) / 2)
        self.L_exact = L if exact else None
        self.gamma = np.array([float(g) for g in gaps])
        self.L = np.array([float(x) for x in L])
        self.step = self.L[:-1] - self.L[1:]
        self._step = self.step.tolist()  # python floats: faster scalar descents
        self._left_cache = {}

    @classmethod
    def from_gaps(cls, lo, hi, gaps):
        return cls(lo, hi, list(gaps))

    @property
    def central_gap(self):
        return (self.hi - self.step[0], self.lo + self.step[0])

    @property
    def ambient(self):
        return (self.lo, self.hi)

    def mass(self, n):
        """Total Lebesgue mass m(A_n) of the 2^n atoms of generation n."""
        if self.L_exact is not None:
            return float(self.mass_exact(n))
        return math.ldexp(float(self.L[n]), n)

    def mass_exact(self, n):
        if self.L_exact is None:
            raise ValueError("skeleton was not built from exact gap lengths")
        return 2 ** n * self.L_exact[n]

    def descend(self, bits):
        """Endpoints of the atom addressed by ``bits``."""
        left, right, step = self.lo, self.hi, self._step
        for n, b in enumerate(bits):
            if b:
                left = left + step[n]
            else:
                right = right - step[n]
        return left, right

    def atom_interval(self, word):
        bits = as_bits(word)
        if len(bits) > self.N:
            raise WordTooLong(f"atom word of length {len(bits)} exceeds N={self.N}")
        return self.descend(bits)

    def gap_interval(self, word):
        """Open gap of the atom ``word``; the empty word gives the central gap."""
        bits = as_bits(word)
        n = len(bits)
        if n >= self.N:
            raise WordTooLong(f"gap word of length {n} must be shorter than N={self.N}")
        left, right = self.descend(bits)
        return right - self._step[n], left + self._step[n]

    def left_endpoints(self, depth):
        """Left endpoints of all 2^depth atoms, in lexicographic word order."""
        if depth > self.N:
            raise WordTooLong(f"depth {depth} exceeds N={self.N}")
        if depth not in self._left_cache:
            pts = np.array([self.lo])
            for n in range(depth):
                pts = np.column_stack([pts, pts + self.step[n]]).ravel()
            pts.flags.writeable = False
            self._left_cache[depth] = pts
        return self._left_cache[depth]

    def locate(self, x):
        return locate(self, x)


def build_skeleton(params):
    """Validate a :class:`BowenParams` and build its skeleton to generation N."""
    report = check_params(params)
    gaps = [2.0 * params.b0] + [params.alpha(n) / 2.0 ** n for n in range(1, params.N)]
    return CantorSkeleton(params.lo, params.hi, gaps, params=params, report=report)


def atom_interval(skel, word):
    return skel.atom_interval(word)


def gap_interval(skel, word):
    return skel.gap_interval(word)


@dataclass(frozen=True)
class Location:
    kind: str  # "atom", "gap", "central_gap" or "outside"
    word: tuple = ()

    @property
    def generation(self):
        return len(self.word)


def locate(skel, x):
    """Where x sits: a generation-N atom, a gap of some word, or outside.

    Atoms are closed and gaps open, so shared endpoints land in atoms.
    """
    if not skel.lo <= x <= skel.hi:
        return Location("outside")
    left, right, step = skel.lo, skel.hi, skel._step
    bits = []
    for n in range(skel.N):
        g_lo, g_hi = right - step[n], left + step[n]
        if g_lo < x < g_hi:
            return Location("central_gap" if n == 0 else "gap", tuple(bits))
        if x <= g_lo:
            bits.append(0)
            right = g_lo
        else:
            bits.append(1)
            left = g_hi
    return Location("atom", tuple(bits))


def atom_depth_array(skel, x, depth=None):
    """For each x, how many generations it survives: the largest n <= depth with x in A_n."""
    depth = skel.N if depth is None else depth
    x = np.asarray(x, dtype=float)
    left = np.full(x.shape, skel.lo)
    right = np.full(x.shape, skel.hi)
    inside = (x >= skel.lo) & (x <= skel.hi)
    out = np.where(inside, 0, -1)
    alive = inside.copy()
    for n in range(depth):
        g_lo, g_hi = right - skel.step[n], left + skel.step[n]
        in_gap = alive & (g_lo < x) & (x < g_hi)
        alive &= ~in_gap
        go_right = x >= g_hi
        left = np.where(go_right, g_hi, left)
        right = np.where(go_right, right, g_lo)
        out = np.where(alive, n + 1, out)
    return out


def cantor_total_measure(params):
    """Lebesgue measure of the limiting Cantor set: (value, tail_bound)."""
    check_params(params)
    if params.alphas is None:
        return 2.0 * params.atom1_length - ZETA2 / params.k, 0.0
    return 2.0 * params.atom1_length - math.fsum(params.alphas), 0.0


def mu_K_cylinder(word):
    """Cantor-Bernoulli mass of a cylinder: exactly 2^-|word|."""
    bits = as_bits(word)
    if not bits:
        raise ValueError("cylinder word must be non-empty")
    return math.ldexp(1.0, -len(bits))


def sample_mu_K(skel, rng, depth, size=None):
    """Left endpoint of a uniformly random depth-``depth`` atom (a point of K)."""
    if depth > skel.N:
        raise WordTooLong(f"depth {depth} exceeds N={skel.N}")
    shape = () if size is None else (size,)
    bits = rng.integers(0, 2, size=shape + (depth,))
    # sequential accumulation matches descend() bit for bit, unlike a dot product
    x = np.full(shape, skel.lo)
    for n in range(depth):
        x = np.where(bits[..., n] == 1, x + skel.step[n], x)
    return float(x) if size is None else x


class BowenBranch:
    """Expanding branch of a Bowen construction, built lazily from a skeleton.

    Maps the generation-1 atom I_a onto the ambient interval so that each gap
    of I_{a w} lands on the gap of I_w, every generation-N atom I_{a u} lands on
    I_u, and every piece has endpoint derivative 2.  Target endpoints are
    produced by the same descent as the source, so gap images match exactly.
    """

    def __init__(self, skel, a):
        if skel.N < 2:
            raise GapRatioError("Bowen branch needs a skeleton with N >= 2")
        self.skel = skel
        self.a = int(a)
        self.x_lo, self.x_hi = skel.descend((self.a,))
        self.y_lo, self.y_hi = skel.lo, skel.hi
        self.d_lo = self.d_hi = 2.0
        g = skel.gamma
        self.class_ratios = g[:-1] / g[1:]  # generation-k gap onto generation-(k-1), k = 1..N-1
        self.atom_ratio = float(skel.L[-2] / skel.L[-1])
        for k, r in enumerate(self.class_ratios, start=1):
            if not r > 2.0:
                raise GapRatioError(f"generation-{k} gap ratio {r:.6g} <= 2")
        if not self.atom_ratio > 2.0:
            raise GapRatioError(f"resolution atom ratio {self.atom_ratio:.6g} <= 2")

    def _class_extrema(self):
        rs = list(self.class_ratios) + [self.atom_ratio]
        return [profile_extrema(2.0, 2.0, 6.0 * (r - 2.0)) for r in rs]

    def min_deriv(self):
        return min(lo for lo, _ in self._class_extrema())

    def max_deriv(self):
        return max(hi for _, hi in self._class_extrema())

    def class_max(self, k):
        """Closed-form derivative maximum on gaps of generation k (k = N: atoms)."""
        r = self.atom_ratio if k >= self.skel.N else self.class_ratios[k - 1]
        return profile_extrema(2.0, 2.0, 6.0 * (float(r) - 2.0))[1]

    def piece_at(self, x, side="right"):
        sk, step = self.skel, self.skel._step
        sl, sr = self.x_lo, self.x_hi
        tl, tr = sk.lo, sk.hi
        for n in range(1, sk.N):
            g_lo, g_hi = sr - step[n], sl + step[n]
            t_lo, t_hi = tr - step[n - 1], tl + step[n - 1]
            inside = (g_lo <= x < g_hi) if side == "right" else (g_lo < x <= g_hi)
            if inside:
                return _piece(g_lo, g_hi, t_lo, t_hi)
            if x < g_lo or (side == "left" and x == g_lo):
                sr, tr = g_lo, t_lo
            else:
                sl, tl = g_hi, t_hi
        return _piece(sl, sr, tl, tr)

    def params_array(self, x, side="right"):
        sk = self.skel
        m = len(x)
        sl = np.full(m, self.x_lo)
        sr = np.full(m, self.x_hi)
        tl = np.full(m, sk.lo)
        tr = np.full(m, sk.hi)
        out = [np.empty(m) for _ in range(4)]
        active = np.ones(m, dtype=bool)
        for n in range(1, sk.N):
            g_lo, g_hi = sr - sk.step[n], sl + sk.step[n]
            t_lo, t_hi = tr - sk.step[n - 1], tl + sk.step[n - 1]
            if side == "right":
                hit = active & (g_lo <= x) & (x < g_hi)
                go_right = x >= g_hi
            else:
                hit = active & (g_lo < x) & (x <= g_hi)
                go_right = x > g_hi
            for o, v in zip(out, (g_lo, g_hi, t_lo, t_hi)):
                o[hit] = v[hit]
            active &= ~hit
            sl = np.where(go_right, g_hi, sl)
            tl = np.where(go_right, t_hi, tl)
            sr = np.where(go_right, sr, g_lo)
            tr = np.where(go_right, tr, t_lo)
            if not active.any():
                break
        for o, v in zip(out, (sl, sr, tl, tr)):
            o[active] = v[active]
        x_lo, x_hi, y_lo, y_hi = out
        two = np.full(m, 2.0)
        return x_lo, x_hi, y_lo, y_hi, two, two, _profile_coeff(x_lo, x_hi, y_lo, y_hi, 2.0, 2.0)

    def joints(self, depth):
        """Gap endpoints inside I_a down to generation min(depth, N-1)."""
        sk, step = self.skel, self.skel._step
        pts = []
        atoms = [(self.x_lo, self.x_hi)]
        for n in range(1, min(depth, sk.N - 1) + 1):
            nxt = []
            for sl, sr in atoms:
                g_lo, g_hi = sr - step[n], sl + step[n]
                pts.extend((g_lo, g_hi))
                nxt.extend(((sl, g_lo), (g_hi, sr)))
            atoms = nxt
        return pts


def _piece(x_lo, x_hi, y_lo, y_hi):
    return MonotonePiece(x_lo, x_hi, y_lo, y_hi, 2.0, 2.0,
                         _profile_coeff(x_lo, x_hi, y_lo, y_hi, 2.0, 2.0))
