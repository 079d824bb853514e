"""Piecewise-monotone C^1 expanding maps of the circle [-1, 1]/(-1 ~ 1) and the 2-torus.

A map is an ordered list of *branches* tiling [-1, 1].  A branch is anything that
can hand back the :class:`MonotonePiece` containing a point; plain pieces are
their own branch, :class:`CompositeBranch` glues several together, and the Bowen
branches of :mod:`pesinlab.cantor` generate their pieces lazily from a skeleton.

Values are returned in lift coordinates by pieces and reduced modulo 2 into
[-1, 1) by the map.  Breakpoint ties resolve to the right-hand piece.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInterval,
    NotC0,
    NotC1,
    NotExpanding,
    OutOfDomain,
    RatioInfeasible,
)

CIRCUMFERENCE = 2.0


def reduce_circle(y):
    """Reduce a lift coordinate (scalar or array) into [-1, 1)."""
    if isinstance(y, np.ndarray):
        out = y - CIRCUMFERENCE * np.floor((y + 1.0) / CIRCUMFERENCE)
        inside = (y >= -1.0) & (y < 1.0)
        out = np.where(inside, y, out)
        return np.where(out >= 1.0, out - CIRCUMFERENCE, out)
    y = float(y)
    if -1.0 <= y < 1.0:
        return y
    out = y - CIRCUMFERENCE * math.floor((y + 1.0) / CIRCUMFERENCE)
    return out - CIRCUMFERENCE if out >= 1.0 else out


def circle_distance(a, b):
    """Distance on the circle of circumference 2."""
    d = np.abs(np.mod(np.asarray(a, dtype=float) - b + 1.0, CIRCUMFERENCE) - 1.0)
    return float(d) if np.ndim(d) == 0 else d


# -- derivative profile p(t) = d_lo + (d_hi - d_lo) t + e t (1 - t) ----------------
# The helpers below only use + - * / so they run unchanged on floats and ndarrays,
# which keeps the scalar and vectorised evaluation paths bit-identical.

def _profile(t, d_lo, d_hi, e):
    return d_lo + t * ((d_hi - d_lo) + e * (1.0 - t))


def _profile_integral(t, d_lo, d_hi, e):
    return t * (d_lo + t * (0.5 * (d_hi - d_lo) + e * (0.5 - t / 3.0)))


def _profile_coeff(x_lo, x_hi, y_lo, y_hi, d_lo, d_hi):
    rho = (y_hi - y_lo) / (x_hi - x_lo)
    return 6.0 * (rho - 0.5 * (d_lo + d_hi))


def profile_extrema(d_lo, d_hi, e):
    """Exact (min, max) of the quadratic profile over t in [0, 1]."""
    lo, hi = min(d_lo, d_hi), max(d_lo, d_hi)
    if e != 0.0:
        b = d_hi - d_lo + e
        t_star = b / (2.0 * e)
        if 0.0 < t_star < 1.0:
            vertex = d_lo + b * b / (4.0 * e)
            if e < 0.0:
                lo = min(lo, vertex)
            else:
                hi = max(hi, vertex)
    return lo, hi


@dataclass(frozen=True)
class MonotonePiece:
    """Increasing C^1 map of [x_lo, x_hi] onto the lift interval [y_lo, y_hi].

    Its derivative in the normalised coordinate t is the quadratic profile with
    prescribed endpoint values ``d_lo`` and ``d_hi``; ``e_coeff`` makes the profile
    integrate to the average slope.
    """

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    d_lo: float
    d_hi: float
    e_coeff: float

    @property
    def ratio(self):
        return (self.y_hi - self.y_lo) / (self.x_hi - self.x_lo)

    def eval(self, x):
        if x == self.x_lo:
            return self.y_lo
        if x == self.x_hi:
            return self.y_hi
        w = self.x_hi - self.x_lo
        t = (x - self.x_lo) / w
        return self.y_lo + w * _profile_integral(t, self.d_lo, self.d_hi, self.e_coeff)

    def deriv(self, x):
        if x == self.x_lo:
            return self.d_lo
        if x == self.x_hi:
            return self.d_hi
        t = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return _profile(t, self.d_lo, self.d_hi, self.e_coeff)

    def min_deriv(self):
        return profile_extrema(self.d_lo, self.d_hi, self.e_coeff)[0]

    def max_deriv(self):
        return profile_extrema(self.d_lo, self.d_hi, self.e_coeff)[1]

    # branch protocol
    def piece_at(self, x, side="right"):
        return self

    def params_array(self, x, side="right"):
        n = len(x)
        return tuple(np.full(n, v) for v in (self.x_lo, self.x_hi, self.y_lo,
                                             self.y_hi, self.d_lo, self.d_hi,
                                             self.e_coeff))

    def joints(self, depth):
        return []


def make_piece(x_lo, x_hi, y_lo, y_hi, d_lo, d_hi):
    """Build a validated expanding piece; raises if it would not expand."""
    x_lo, x_hi, y_lo, y_hi = float(x_lo), float(x_hi), float(y_lo), float(y_hi)
    d_lo, d_hi = float(d_lo), float(d_hi)
    if not (x_lo < x_hi) or not (y_lo < y_hi):
        raise DegenerateInterval(
            f"need x_lo < x_hi and y_lo < y_hi, got [{x_lo}, {x_hi}] -> [{y_lo}, {y_hi}]")
    if d_lo <= 1.0 or d_hi <= 1.0:
        raise RatioInfeasible(f"endpoint derivatives must exceed 1, got {d_lo}, {d_hi}")
    e = _profile_coeff(x_lo, x_hi, y_lo, y_hi, d_lo, d_hi)
    p_min = profile_extrema(d_lo, d_hi, e)[0]
    if p_min <= 1.0:
        rho = (y_hi - y_lo) / (x_hi - x_lo)
        raise RatioInfeasible(
            f"piece with ratio {rho:.6g} and endpoint slopes ({d_lo}, {d_hi}) has "
            f"minimum derivative {p_min:.6g} <= 1")
    return MonotonePiece(x_lo, x_hi, y_lo, y_hi, d_lo, d_hi, e)


def raw_piece(x_lo, x_hi, y_lo, y_hi, d_lo, d_hi):
    """Unchecked piece constructor for hot paths whose inputs are already valid."""
    return MonotonePiece(x_lo, x_hi, y_lo, y_hi, d_lo, d_hi,
                         _profile_coeff(x_lo, x_hi, y_lo, y_hi, d_lo, d_hi))


def piece_eval(piece, x):
    if not (piece.x_lo <= x <= piece.x_hi):
        raise OutOfDomain(f"{x} outside [{piece.x_lo}, {piece.x_hi}]")
    return piece.eval(x)


def piece_deriv(piece, x):
    if not (piece.x_lo <= x <= piece.x_hi):
        raise OutOfDomain(f"{x} outside [{piece.x_lo}, {piece.x_hi}]")
    return piece.deriv(x)


def eval_params(x, params):
    """Vectorised value and derivative of pieces given by ``params`` at ``x``."""
    x_lo, x_hi, y_lo, y_hi, d_lo, d_hi, e = params
    w = x_hi - x_lo
    t = (x - x_lo) / w
    y = y_lo + w * _profile_integral(t, d_lo, d_hi, e)
    d = _profile(t, d_lo, d_hi, e)
    at_lo, at_hi = x == x_lo, x == x_hi
    y = np.where(at_lo, y_lo, np.where(at_hi, y_hi, y))
    d = np.where(at_lo, d_lo, np.where(at_hi, d_hi, d))
    return y, d


class CompositeBranch:
    """Consecutive sub-branches acting as one monotone branch."""

    def __init__(self, parts):
        self.parts = tuple(parts)
        for a, b in zip(self.parts, self.parts[1:]):
            if a.x_hi != b.x_lo:
                raise DegenerateInterval(f"sub-branches do not tile: {a.x_hi} != {b.x_lo}")
        self._starts = [p.x_lo for p in self.parts]
        self._starts_arr = np.array(self._starts)

    x_lo = property(lambda self: self.parts[0].x_lo)
    x_hi = property(lambda self: self.parts[-1].x_hi)
    y_lo = property(lambda self: self.parts[0].y_lo)
    y_hi = property(lambda self: self.parts[-1].y_hi)
    d_lo = property(lambda self: self.parts[0].d_lo)
    d_hi = property(lambda self: self.parts[-1].d_hi)

    def _index(self, x, side):
        if side == "right":
            k = bisect.bisect_right(self._starts, x) - 1
        else:
            k = bisect.bisect_left(self._starts, x) - 1
        return min(max(k, 0), len(self.parts) - 1)

    def piece_at(self, x, side="right"):
        return self.parts[self._index(x, side)].piece_at(x, side)

    def params_array(self, x, side="right"):
        idx = np.searchsorted(self._starts_arr, x, side=side) - 1
        idx = np.clip(idx, 0, len(self.parts) - 1)
        out = [np.empty(len(x)) for _ in range(7)]
        for k, part in enumerate(self.parts):
            m = idx == k
            if m.any():
                for o, v in zip(out, part.params_array(x[m], side)):
                    o[m] = v
        return tuple(out)

    def min_deriv(self):
        return min(p.min_deriv() for p in self.parts)

    def max_deriv(self):
        return max(p.max_deriv() for p in self.parts)

    def joints(self, depth):
        pts = []
        for k, p in enumerate(self.parts):
            if k:
                pts.append(p.x_lo)
            pts.extend(p.joints(depth))
        return pts


@dataclass
class ValidationReport:
    c0_residual: float
    c1_residual: float
    lambda_: float
    degree: int
    degree_residual: float
    n_breakpoints: int
    worst_c0_at: float = float("nan")
    worst_c1_at: float = float("nan")

    def as_dict(self):
        return {
            "c0_residual": self.c0_residual,
            "c1_residual": self.c1_residual,
            "lambda": self.lambda_,
            "degree": self.degree,
            "degree_residual": self.degree_residual,
            "n_breakpoints": self.n_breakpoints,
        }


class CircleMap:
    """Ordered branches tiling [-1, 1] with a symbol per branch for itineraries."""

    def __init__(self, branches, symbols=None, name="circle-map"):
        self.branches = tuple(branches)
        self.symbols = tuple(range(len(self.branches))) if symbols is None else tuple(symbols)
        self.name = name
        if len(self.symbols) != len(self.branches):
            raise ValueError("one symbol per branch required")
        if self.branches[0].x_lo != -1.0 or self.branches[-1].x_hi != 1.0:
            raise DegenerateInterval("branches must cover [-1, 1]")
        for a, b in zip(self.branches, self.branches[1:]):
            if a.x_hi != b.x_lo:
                raise DegenerateInterval(f"branches do not tile: {a.x_hi} != {b.x_lo}")
        self._starts = [b.x_lo for b in self.branches]
        self._starts_arr = np.array(self._starts)
        self._symbols_arr = np.array(self.symbols, dtype=np.int64)
        winding = sum(b.y_hi - b.y_lo for b in self.branches) / CIRCUMFERENCE
        self.degree = int(round(winding))
        self.degree_residual = abs(winding - self.degree)
        self.lambda_ = min(b.min_deriv() for b in self.branches)

    @property
    def alphabet_size(self):
        return max(self.symbols) + 1

    def branch_index(self, x):
        k = bisect.bisect_right(self._starts, x) - 1
        return min(max(k, 0), len(self.branches) - 1)

    def piece_at(self, x):
        return self.branches[self.branch_index(x)].piece_at(x)

    def symbol(self, x):
        return self.symbols[self.branch_index(x)]

    def lift(self, x):
        return self.piece_at(x).eval(x)

    def __call__(self, x):
        return reduce_circle(self.lift(x))

    def deriv(self, x):
        return self.piece_at(x).deriv(x)

    def params_array(self, x):
        idx = np.clip(np.searchsorted(self._starts_arr, x, side="right") - 1,
                      0, len(self.branches) - 1)
        out = [np.empty(len(x)) for _ in range(7)]
        for k, b in enumerate(self.branches):
            m = idx == k
            if m.any():
                for o, v in zip(out, b.params_array(x[m])):
                    o[m] = v
        return tuple(out), idx

    def step_array(self, x):
        """Vectorised (f(x) reduced, f'(x), symbol(x)) for an array of points."""
        x = np.asarray(x, dtype=float)
        params, idx = self.params_array(x)
        y, d = eval_params(x, params)
        return reduce_circle(y), d, self._symbols_arr[idx]

    def eval_array(self, x):
        return self.step_array(x)[0]

    def deriv_array(self, x):
        return self.step_array(x)[1]


def _check_domain(x):
    if not (-1.0 <= x <= 1.0):
        raise OutOfDomain(f"{x} is not a circle coordinate in [-1, 1]")


def map_eval(fmap, x):
    _check_domain(x)
    return fmap(x)


def map_deriv(fmap, x):
    _check_domain(x)
    return fmap.deriv(x)


def validate_circle_map(fmap, tol=1e-9, depth=10):
    """Check C^0/C^1 gluing at every breakpoint (wrap included), lambda and degree.

    Lazily generated branches are checked down to ``depth`` generations.
    Raises NotC0 / NotC1 / NotExpanding carrying the report in ``.report``.
    """
    points = []  # (x, left piece, right piece)
    nb = len(fmap.branches)
    for k, b in enumerate(fmap.branches):
        for x in b.joints(depth):
            points.append((x, b.piece_at(x, "left"), b.piece_at(x, "right")))
        left = b.piece_at(b.x_hi, "left")
        nxt = fmap.branches[(k + 1) % nb]
        right = nxt.piece_at(nxt.x_lo, "right")
        # value mismatch is measured on the circle, so the wrap -1 ~ 1 needs no special case
        points.append((b.x_hi, left, right, nxt.x_lo))
    c0 = c1 = 0.0
    c0_at = c1_at = float("nan")
    for item in points:
        x, left, right = item[:3]
        x_right = item[3] if len(item) == 4 else x
        r0 = circle_distance(left.eval(x), right.eval(x_right))
        r1 = abs(left.deriv(x) - right.deriv(x_right))
        if r0 > c0:
            c0, c0_at = r0, x
        if r1 > c1:
            c1, c1_at = r1, x
    report = ValidationReport(c0, c1, fmap.lambda_, fmap.degree, fmap.degree_residual,
                              len(points), c0_at, c1_at)
    if c0 > tol or fmap.degree_residual > tol:
        err = NotC0(f"value mismatch {c0:.3g} at x={c0_at} (tol {tol})")
        err.report = report
        raise err
    if c1 > tol:
        err = NotC1(f"derivative mismatch {c1:.3g} at x={c1_at} (tol {tol})")
        err.report = report
        raise err
    if not fmap.lambda_ > 1.0:
        err = NotExpanding(f"minimum derivative {fmap.lambda_} <= 1")
        err.report = report
        raise err
    return report


def orbit(fmap, x0, n):
    """The first n points x0, f(x0), ..., f^{n-1}(x0)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_domain(x0)
    pts = [float(x0)]
    for _ in range(n - 1):
        pts.append(fmap(pts[-1]))
    return pts


def itinerary(fmap, x0, n):
    """Branch symbols visited by the first n orbit points."""
    return [fmap.symbol(x) for x in orbit(fmap, x0, n)]


def orbit_block(fmap, x0, n, noise=0.0, rng=None):
    """Orbits of many starting points at once.

    Returns (points, log_derivs, symbols), each of shape (len(x0), n).  With
    ``noise > 0`` each step adds a uniform kick in (-noise, noise): the result is
    a pseudo-orbit, which keeps exactly-representable maps such as the doubling
    map from collapsing onto a fixed point after ~53 steps.
    """
    x = np.asarray(x0, dtype=float).copy()
    m = len(x)
    pts = np.empty((m, n))
    logd = np.empty((m, n))
    sym = np.empty((m, n), dtype=np.int64)
    for j in range(n):
        pts[:, j] = x
        y, d, s = fmap.step_array(x)
        logd[:, j] = np.log(d)
        sym[:, j] = s
        if noise:
            y = reduce_circle(y + noise * rng.uniform(-1.0, 1.0, m))
        x = y
    return pts, logd, sym


@dataclass
class TorusMap:
    """Product map (x, y) -> (f1(x), f2(y)) on the 2-torus."""

    f1: CircleMap
    f2: CircleMap
    name: str = field(default="torus-map")

    @property
    def gamma(self):
        return min(self.f1.lambda_, self.f2.lambda_)

    @property
    def alphabet_size(self):
        return self.f1.alphabet_size * self.f2.alphabet_size

    def __call__(self, p):
        return (self.f1(p[0]), self.f2(p[1]))

    def symbol(self, p):
        return self.f1.symbol(p[0]) * self.f2.alphabet_size + self.f2.symbol(p[1])

    def log_det(self, p):
        return math.log(self.f1.deriv(p[0])) + math.log(self.f2.deriv(p[1]))

    def step_array(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, dx, sx = self.f1.step_array(pts[:, 0])
        y, dy, sy = self.f2.step_array(pts[:, 1])
        return (np.column_stack([x, y]), np.log(dx) + np.log(dy),
                sx * self.f2.alphabet_size + sy)


def torus_eval(tmap, p):
    _check_domain(p[0])
    _check_domain(p[1])
    return tmap(p)


def torus_log_det(tmap, p):
    _check_domain(p[0])
    _check_domain(p[1])
    return tmap.log_det(p)


def torus_orbit_block(tmap, p0, n, noise=0.0, rng=None):
    """Torus analogue of :func:`orbit_block`; points have shape (m, n, 2)."""
    p = np.asarray(p0, dtype=float).copy()
    m = len(p)
    pts = np.empty((m, n, 2))
    logd = np.empty((m, n))
    sym = np.empty((m, n), dtype=np.int64)
    for j in range(n):
        pts[:, j] = p
        q, ld, s = tmap.step_array(p)
        logd[:, j] = ld
        sym[:, j] = s
        if noise:
            q = reduce_circle(q + noise * rng.uniform(-1.0, 1.0, q.shape))
        p = q
    return pts, logd, sym
