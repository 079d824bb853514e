"""Measures on the circle and torus, observables, and the weak* distance.

Observables are vectorised callables wrapped in :class:`Observable`, which also
carries what integration needs to be exact or certified: a constant value, the
value on particular Cantor skeletons, breakpoints, and a Lipschitz bound.
Torus observables are finite sums of separable terms c * f(x) * g(y).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DepthExceeded, DomainMismatch, UnsupportedVariant
from .piecewise_map import CircleMap, TorusMap, circle_distance

# -- observables ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Observable:
    """Real function on the circle [-1, 1].

    ``constant``: value if the function is constant.  ``on_K``: mapping from a
    skeleton to the constant value the function takes on its Cantor set.
    ``lip``: a Lipschitz bound (estimated by sampling when None).
    """

    fn: object
    name: str = "phi"
    constant: float | None = None
    on_K: dict = field(default_factory=dict)
    breaks: tuple = ()
    lip: float | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.constant is not None:
            return np.full(x.shape, self.constant)
        return self.fn(x)

    def lipschitz(self, lo=-1.0, hi=1.0, samples=8193):
        if self.constant is not None:
            return 0.0
        if self.lip is not None:
            return self.lip
        x = np.linspace(lo, hi, samples)
        y = self(x)
        return float(np.max(np.abs(np.diff(y)) / np.diff(x)))


def constant(c, name=None):
    return Observable(None, name or f"const{c}", constant=float(c))


ONE = constant(1.0, "one")


@dataclass(frozen=True, eq=False)
class TorusObservable:
    """Sum of separable terms: sum_k c_k f_k(x) g_k(y)."""

    terms: tuple  # of (coef, Observable, Observable)
    name: str = "Phi"

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        out = np.zeros(x.shape)
        for c, f, g in self.terms:
            out = out + c * f(x) * g(y)
        return out


def harmonic(m, kind):
    """(1 + cos(pi m x))/2 or (1 + sin(pi m x))/2; range [0, 1], Lipschitz pi m / 2."""
    trig = np.cos if kind == "cos" else np.sin
    return Observable(lambda x, m=m, trig=trig: 0.5 * (1.0 + trig(math.pi * m * x)),
                      name=f"{kind}{m}", lip=math.pi * m / 2.0)


def psi_observable(system):
    """The potential -log f' of a circle system, or -log det Df as a torus observable."""
    if system.is_torus:
        p1, p2 = (psi_observable(f) for f in system.factors)
        return TorusObservable(((1.0, p1, ONE), (1.0, ONE, p2)), name="psi")
    fmap = system.map
    on_K = {system.skeletons[lab]: -v for lab, v in system.k_log_deriv.items()}
    slopes = {(b.d_lo, b.d_hi, getattr(b, "e_coeff", None)) for b in fmap.branches}
    const = None
    if len(slopes) == 1:
        d_lo, d_hi, e = next(iter(slopes))
        if e == 0.0 and d_lo == d_hi:
            const = -math.log(d_lo)
    breaks = tuple(b.x_lo for b in fmap.branches[1:])
    return Observable(lambda x: -np.log(fmap.deriv_array(np.atleast_1d(x))).reshape(np.shape(x)),
                      name="psi", constant=const, on_K=on_K, breaks=breaks)


def log_deriv_observable(system):
    """log|det Df| = -psi."""
    psi = psi_observable(system)
    if isinstance(psi, TorusObservable):
        return TorusObservable(tuple((-c, f, g) for c, f, g in psi.terms), name="logdet")
    return Observable(lambda x: -psi(x), name="logderiv",
                      constant=None if psi.constant is None else -psi.constant,
                      on_K={k: -v for k, v in psi.on_K.items()}, breaks=psi.breaks)


class ObservableFamily:
    """phi_0 = psi followed by harmonics with values in [0, 1], weighted 2^-i."""

    def __init__(self, system, n_terms=33):
        if n_terms < 1:
            raise ValueError("n_terms must be >= 1")
        self.system = system
        self.n_terms = n_terms
        self.psi = psi_observable(system)
        self.torus = system.is_torus
        self.n_harm = n_terms - 1
        self.m_max = (self.n_harm + 1) // 2
        if self.torus:
            self.pairs = _diagonal_pairs(self.n_harm)
            self.m_max = max((max(i, j) + 1) // 2 for i, j in self.pairs) if self.pairs else 0
        self.weights = np.ldexp(1.0, -np.arange(n_terms))
        self._cantor = {}

    @property
    def tail_bound(self):
        return math.ldexp(1.0, -(self.n_terms - 1))

    def circle_harmonic(self, i):
        m = (i + 1) // 2
        return harmonic(m, "cos" if i % 2 else "sin")

    def harmonic_obs(self, i):
        """phi_i (i >= 1) as an Observable or TorusObservable."""
        if not self.torus:
            return self.circle_harmonic(i)
        a, b = self.pairs[i - 1]
        fa = ONE if a == 0 else self.circle_harmonic(a)
        fb = ONE if b == 0 else self.circle_harmonic(b)
        return TorusObservable(((1.0, fa, fb),), name=f"h{a}h{b}")

    def observables(self):
        return [self.psi] + [self.harmonic_obs(i) for i in range(1, self.n_terms)]

    def harmonic_matrix(self, x):
        """Circle harmonics phi_1.. at points x: shape x.shape + (2*m_max,)."""
        x = np.asarray(x, dtype=float)
        # powers of exp(i pi x) give every frequency from one complex exponential
        z = np.exp(1j * math.pi * x)[..., None]
        zm = np.cumprod(np.broadcast_to(z, x.shape + (self.m_max,)), axis=-1)
        out = np.empty(x.shape + (2 * self.m_max,))
        out[..., 0::2] = 0.5 * (1.0 + zm.real)
        out[..., 1::2] = 0.5 * (1.0 + zm.imag)
        return np.clip(out, 0.0, 1.0, out=out)

    def values(self, pts):
        """phi_1..phi_{n_terms-1} at each point; shape (npts, n_terms-1)."""
        if not self.torus:
            return self.harmonic_matrix(pts)[..., : self.n_harm]
        pts = np.asarray(pts, dtype=float)
        hx = _with_one(self.harmonic_matrix(pts[..., 0]))
        hy = _with_one(self.harmonic_matrix(pts[..., 1]))
        ia = np.array([a for a, _ in self.pairs])
        ib = np.array([b for _, b in self.pairs])
        return hx[..., ia] * hy[..., ib]

    def psi_values(self, pts):
        return self.psi(pts)


def _with_one(h):
    return np.concatenate([np.ones(h.shape[:-1] + (1,)), h], axis=-1)


def _diagonal_pairs(count):
    """Cantor-diagonal enumeration of index pairs (i, j) != (0, 0)."""
    pairs = []
    s = 1
    while len(pairs) < count:
        for i in range(s + 1):
            pairs.append((i, s - i))
        s += 1
    return pairs[:count]


# -- measures -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Empirical:
    points: np.ndarray
    weights: np.ndarray

    @property
    def space(self):
        return "torus" if np.ndim(self.points) == 2 else "circle"


@dataclass(frozen=True, eq=False)
class Dirac:
    point: object

    @property
    def space(self):
        return "torus" if np.ndim(self.point) == 1 else "circle"


@dataclass(frozen=True, eq=False)
class LebesgueUniform:
    """Normalised Lebesgue measure on [lo, hi] (the whole circle by default)."""

    lo: float = -1.0
    hi: float = 1.0
    space = "circle"


@dataclass(frozen=True, eq=False)
class CantorBernoulli:
    """Cylinder weights on the depth-``depth`` atoms of a skeleton (uniform if None).

    Represents the measure with these cylinder masses spread by the Cantor
    structure below; ``bit_symbols`` are the map symbols of the two first-level atoms.
    """

    skeleton: object
    depth: int
    weights: np.ndarray | None = None
    label: str = "K"
    bit_symbols: tuple = (0, 1)
    space = "circle"

    def __post_init__(self):
        if self.depth > self.skeleton.N:
            raise DepthExceeded(f"depth {self.depth} exceeds skeleton N={self.skeleton.N}")
        if self.weights is not None and len(self.weights) != 2 ** self.depth:
            raise ValueError("weights must have one entry per depth-d atom")

    @property
    def uniform(self):
        return self.weights is None

    def masses(self):
        if self.weights is None:
            return np.full(2 ** self.depth, math.ldexp(1.0, -self.depth))
        return np.asarray(self.weights, dtype=float)

    def marginal(self, depth):
        """The same measure seen at a coarser depth."""
        if depth > self.depth:
            raise DepthExceeded(f"cannot refine depth {self.depth} to {depth}")
        if self.weights is None:
            return CantorBernoulli(self.skeleton, depth, None, self.label, self.bit_symbols)
        w = self.masses().reshape(2 ** depth, -1).sum(axis=1)
        return CantorBernoulli(self.skeleton, depth, w, self.label, self.bit_symbols)


@dataclass(frozen=True, eq=False)
class Product:
    left: object
    right: object
    space = "torus"

    def __post_init__(self):
        if self.left.space != "circle" or self.right.space != "circle":
            raise DomainMismatch("product factors must be circle measures")


def mu_K(system, label=None, depth=None):
    """Cantor-Bernoulli measure on a labelled skeleton (product for torus systems)."""
    if system.is_torus:
        a, b = label if label is not None else system.product_labels[0]
        f1, f2 = system.factors
        return Product(mu_K(f1, a, depth), mu_K(f2, b, depth))
    label = label if label is not None else next(iter(system.skeletons))
    skel = system.skeleton(label)
    d = min(skel.N, 20) if depth is None else depth
    return CantorBernoulli(skel, d, None, label, system.bit_symbols[label])


def lebesgue(system_or_space="circle"):
    torus = system_or_space == "torus" or getattr(system_or_space, "is_torus", False)
    return Product(LebesgueUniform(), LebesgueUniform()) if torus else LebesgueUniform()


def dirac(point):
    if np.ndim(point) == 1:
        return Dirac(tuple(float(v) for v in point))
    return Dirac(float(point))


def empirical(points, weights=None):
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        raise ValueError("empirical measure needs at least one point")
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    return Empirical(pts, w)


def empirical_from_orbit(fmap, x0, n):
    """sigma_n(x0): equal weights on x0, f(x0), ..., f^{n-1}(x0)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = [x0]
    for _ in range(n - 1):
        pts.append(fmap(pts[-1]))
    return empirical(pts)


def mixture(measures, coeffs):
    """Convex combination of Empirical/Dirac measures by weight concatenation."""
    coeffs = np.asarray(coeffs, dtype=float)
    if np.any(coeffs < 0) or abs(math.fsum(coeffs) - 1.0) > 1e-12:
        raise ValueError("mixture coefficients must be a probability vector")
    pts, ws = [], []
    for m, c in zip(measures, coeffs):
        if isinstance(m, Dirac):
            m = empirical([m.point])
        if not isinstance(m, Empirical):
            raise UnsupportedVariant("mixtures are built from empirical measures")
        pts.append(m.points)
        ws.append(c * m.weights)
    return Empirical(np.concatenate(pts), np.concatenate(ws))


def product_measure(mu1, mu2):
    return Product(mu1, mu2)


# -- integration ----------------------------------------------------------------

_GL = {n: np.polynomial.legendre.leggauss(n) for n in (64, 128)}
_PANELS = 8


def _gauss_legendre(obs, lo, hi, nodes):
    cuts = np.linspace(lo, hi, _PANELS + 1)
    cuts = np.unique(np.concatenate([cuts, [b for b in obs.breaks if lo < b < hi]]))
    t, w = _GL[nodes]
    a, b = cuts[:-1, None], cuts[1:, None]
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    vals = obs(x.ravel()).reshape(x.shape)
    return math.fsum((0.5 * (b - a) * w * vals).ravel()) / (hi - lo)


def _space_of_obs(obs):
    return "torus" if isinstance(obs, TorusObservable) else "circle"


def integrate(measure, obs):
    """(value, error_bound) of the integral of ``obs`` against ``measure``."""
    if measure.space != _space_of_obs(obs):
        raise DomainMismatch(f"{_space_of_obs(obs)} observable on a {measure.space} measure")
    if isinstance(measure, Product):
        return _integrate_product(measure, obs)
    if isinstance(measure, Empirical):
        return float(np.dot(measure.weights, obs(measure.points))), 0.0
    if isinstance(measure, Dirac):
        if isinstance(obs, TorusObservable):
            return float(obs(np.array([measure.point]))[0]), 0.0
        return float(obs(np.array([measure.point]))[0]), 0.0
    if obs.constant is not None:
        return obs.constant, 0.0
    if isinstance(measure, LebesgueUniform):
        fine = _gauss_legendre(obs, measure.lo, measure.hi, 128)
        coarse = _gauss_legendre(obs, measure.lo, measure.hi, 64)
        return fine, abs(fine - coarse)
    if isinstance(measure, CantorBernoulli):
        if measure.skeleton in obs.on_K:
            return obs.on_K[measure.skeleton], 0.0
        return cantor_quadrature(measure, obs, quad_depth(measure.skeleton))
    raise UnsupportedVariant(f"cannot integrate against {type(measure).__name__}")


QUAD_DEPTH = 20


def quad_depth(skel):
    """Depth of the left-endpoint rule used for every measure on ``skel``.

    One depth per skeleton gives each Cantor-Bernoulli measure a single
    representative, so distances between them form an exact metric.
    """
    return min(skel.N, QUAD_DEPTH)


def cylinder_masses(measure, depth):
    """Masses of the depth-``depth`` atoms: summed above the measure's depth, split evenly below."""
    d = measure.depth
    if measure.weights is None:
        return np.full(2 ** depth, math.ldexp(1.0, -depth))
    w = measure.masses()
    if depth <= d:
        return w.reshape(2 ** depth, -1).sum(axis=1)
    return np.repeat(w, 2 ** (depth - d)) * math.ldexp(1.0, d - depth)


def cantor_quadrature(measure, obs, depth):
    """Left-endpoint rule at ``depth``: (value, Lip * L_depth).

    Every atom's mass sits within L_depth of its left endpoint, which gives the bound.
    """
    skel = measure.skeleton
    if depth > skel.N:
        raise DepthExceeded(f"depth {depth} exceeds skeleton N={skel.N}")
    val = float(np.dot(cylinder_masses(measure, depth), obs(skel.left_endpoints(depth))))
    return val, obs.lipschitz(skel.lo, skel.hi) * float(skel.L[depth])


def _integrate_product(measure, obs):
    total, err = 0.0, 0.0
    for c, f, g in obs.terms:
        a, ea = integrate(measure.left, f)
        b, eb = integrate(measure.right, g)
        total += c * a * b
        err += abs(c) * (abs(a) * eb + abs(b) * ea + ea * eb)
    return total, err


_CACHE_DEPTH = 12
_CHUNK = 2 ** 16


def _cantor_table(family, skel):
    """Means of the circle harmonics over the quadrature points of each atom at depth <= 12."""
    key = id(skel)
    if key not in family._cantor:
        q = quad_depth(skel)
        c = min(q, _CACHE_DEPTH)
        per = 2 ** (q - c)
        pts = skel.left_endpoints(q)
        step = max(per, _CHUNK)
        rows = [family.harmonic_matrix(pts[i:i + step]).reshape(-1, per, 2 * family.m_max).mean(axis=1)
                for i in range(0, len(pts), step)]
        family._cantor[key] = (skel, c, np.concatenate(rows))  # keep skel alive so its id stays unique
    return family._cantor[key][1:]


def _circle_harmonics(measure, family):
    """Integrals and error bounds of the circle harmonics cos1, sin1, cos2, ... under a circle measure."""
    k = 2 * family.m_max
    if isinstance(measure, (Empirical, Dirac)):
        pts = measure.points if isinstance(measure, Empirical) else np.array([measure.point])
        w = measure.weights if isinstance(measure, Empirical) else np.ones(1)
        return w @ family.harmonic_matrix(pts), np.zeros(k)
    if isinstance(measure, CantorBernoulli):
        skel = measure.skeleton
        q = quad_depth(skel)
        lip = math.pi * (np.arange(k) // 2 + 1) / 2.0
        c, table = _cantor_table(family, skel)
        if measure.weights is None or measure.depth <= c:
            vals = cylinder_masses(measure, c) @ table
        else:
            w = cylinder_masses(measure, q)
            pts = skel.left_endpoints(q)
            vals = sum(w[i:i + _CHUNK] @ family.harmonic_matrix(pts[i:i + _CHUNK])
                       for i in range(0, len(pts), _CHUNK))
        return vals, lip * float(skel.L[q])
    res = [integrate(measure, family.circle_harmonic(i)) for i in range(1, k + 1)]
    return np.array([v for v, _ in res]), np.array([e for _, e in res])


def family_integrals(measure, family):
    """Integrals of phi_0..phi_{n-1} and their error bounds."""
    if (measure.space == "torus") != family.torus:
        raise DomainMismatch("measure and observable family live on different spaces")
    vals = np.empty(family.n_terms)
    errs = np.zeros(family.n_terms)
    if isinstance(measure, (Empirical, Dirac)):
        pts = measure.points if isinstance(measure, Empirical) else np.array([measure.point])
        w = measure.weights if isinstance(measure, Empirical) else np.ones(1)
        vals[0] = float(np.dot(w, family.psi(pts)))
        vals[1:] = w @ family.values(pts)
        return vals, errs
    vals[0], errs[0] = integrate(measure, family.psi)
    if not family.torus:
        h, e = _circle_harmonics(measure, family)
        vals[1:], errs[1:] = h[: family.n_harm], e[: family.n_harm]
        return vals, errs
    if not isinstance(measure, Product):
        raise UnsupportedVariant(f"cannot integrate against {type(measure).__name__}")
    hx, ex = (_with_one(v) for v in _circle_harmonics(measure.left, family))
    hy, ey = (_with_one(v) for v in _circle_harmonics(measure.right, family))
    ex[0] = ey[0] = 0.0
    ia = np.array([a for a, _ in family.pairs])
    ib = np.array([b for _, b in family.pairs])
    vals[1:] = hx[ia] * hy[ib]
    errs[1:] = np.abs(hx[ia]) * ey[ib] + np.abs(hy[ib]) * ex[ia] + ex[ia] * ey[ib]
    return vals, errs


def weak_star_dist(mu, nu, family):
    """(value, tail_bound) of sum_i 2^-i |int phi_i dmu - int phi_i dnu| over the family."""
    a, _ = family_integrals(mu, family)
    b, _ = family_integrals(nu, family)
    return float(np.dot(family.weights, np.abs(a - b))), family.tail_bound


# -- pushforward ----------------------------------------------------------------


def pushforward(fmap, measure):
    """Image measure under a circle or torus map."""
    if isinstance(measure, Dirac):
        if isinstance(fmap, TorusMap):
            return Dirac(tuple(float(v) for v in fmap(measure.point)))
        return Dirac(float(fmap(measure.point)))
    if isinstance(measure, Empirical):
        pts = fmap.step_array(measure.points)[0]
        return Empirical(pts, measure.weights)
    if isinstance(measure, CantorBernoulli):
        return _push_cantor(fmap, measure)
    if isinstance(measure, Product) and isinstance(fmap, TorusMap):
        return Product(pushforward(fmap.f1, measure.left), pushforward(fmap.f2, measure.right))
    raise UnsupportedVariant(f"pushforward of {type(measure).__name__} is not supported")


def _push_cantor(fmap, measure):
    if not isinstance(fmap, CircleMap):
        raise UnsupportedVariant("Cantor-Bernoulli measures live on the circle")
    skel = measure.skeleton
    if measure.depth < 1:
        raise DepthExceeded("depth-0 measure has no cylinder structure to shift")
    for a in (0, 1):
        x = skel.atom_interval((a,))[0]
        if circle_distance(fmap(x), skel.lo) > 1e-12:
            raise UnsupportedVariant("skeleton is not carried onto itself by this map")
    w = measure.masses()
    half = len(w) // 2
    if measure.uniform:
        shifted = None
    else:
        shifted = w[:half] + w[half:]
    return CantorBernoulli(skel, measure.depth - 1, shifted, measure.label, measure.bit_symbols)
