"""Concrete maps: doubling, a C^infinity affine reference, the one- and two-Cantor-set
C^1 examples, and torus products of any two of them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from .cantor import BowenBranch, BowenParams, CantorSkeleton, build_skeleton, cantor_total_measure
from .errors import ConfigError, ConjugacyViolation, GlueRatioError, ParamsInfeasible
from .piecewise_map import CircleMap, CompositeBranch, TorusMap, circle_distance, make_piece

LOG2 = math.log(2.0)


@dataclass
class BuiltSystem:
    """A map plus the Cantor skeletons that carry its invariant measures.

    ``bit_symbols[label]`` gives the map symbols of the two generation-1 atoms of
    that skeleton; ``k_log_deriv[label]`` is the constant value of log f' on it.
    """

    kind: str
    map: object
    skeletons: dict = field(default_factory=dict)
    bit_symbols: dict = field(default_factory=dict)
    k_log_deriv: dict = field(default_factory=dict)
    bowen: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    factors: tuple = ()
    product_labels: list = field(default_factory=list)
    lebesgue_invariant: bool = False

    @property
    def is_torus(self):
        return isinstance(self.map, TorusMap)

    @property
    def labels(self):
        return self.product_labels if self.is_torus else list(self.skeletons)

    @property
    def spec(self):
        """Config-style map spec that rebuilds this system."""
        if self.is_torus:
            return {"kind": "torus", "left": self.factors[0].spec, "right": self.factors[1].spec}
        keys = {"doubling": (), "affine3": ("N",), "example1": ("b0", "k", "N"),
                "example2": ("b0", "k", "c1", "b1", "k2", "N")}[self.kind]
        return {"kind": self.kind, **{k: self.params[k] for k in keys}}

    def skeleton(self, label):
        if self.is_torus:
            a, b = label
            return self.factors[0].skeletons[a], self.factors[1].skeletons[b]
        try:
            return self.skeletons[label]
        except KeyError:
            raise ConfigError(f"{self.kind} has no skeleton labelled {label!r}") from None


def build_doubling():
    pieces = [make_piece(-1.0, 0.0, -2.0, 0.0, 2.0, 2.0),
              make_piece(0.0, 1.0, 0.0, 2.0, 2.0, 2.0)]
    return BuiltSystem("doubling", CircleMap(pieces, name="doubling"), lebesgue_invariant=True)


def build_reference_affine(N=24):
    """x -> 3x on three affine pieces; its Cantor set is the middle-thirds set."""
    third = 1.0 / 3.0
    pieces = [make_piece(-1.0, -third, -1.0, 1.0, 3.0, 3.0),
              make_piece(-third, third, -1.0, 1.0, 3.0, 3.0),
              make_piece(third, 1.0, -1.0, 1.0, 3.0, 3.0)]
    fmap = CircleMap(pieces, symbols=(0, 2, 1), name="affine3")
    skel = CantorSkeleton.from_gaps(-1, 1, [Fraction(2, 3 ** (n + 1)) for n in range(N)])
    return BuiltSystem("affine3", fmap, skeletons={"K": skel}, bit_symbols={"K": (0, 1)},
                       k_log_deriv={"K": math.log(3.0)}, params={"N": N},
                       lebesgue_invariant=True)


def build_example1(b0=0.25, k=4.0, N=24):
    """Degree-3 map: Bowen branches on [-1, -b0] and [b0, 1], a central piece onto [-1, 1]."""
    if not 0.0 < b0 < 0.5:
        raise ParamsInfeasible(f"need 0 < b0 < 1/2 so the central piece expands, got {b0}")
    skel = build_skeleton(BowenParams(-1.0, 1.0, b0, k, None, N))
    g0, g1 = BowenBranch(skel, 0), BowenBranch(skel, 1)
    # take the breakpoints from the skeleton so the branches tile bit-exactly
    central = make_piece(g0.x_hi, g1.x_lo, -1.0, 1.0, 2.0, 2.0)
    fmap = CircleMap([g0, central, g1], symbols=(0, 2, 1), name="example1")
    return BuiltSystem("example1", fmap, skeletons={"K": skel}, bit_symbols={"K": (0, 1)},
                       k_log_deriv={"K": LOG2}, bowen={"K": (g0, g1)},
                       params={"b0": b0, "k": k, "N": N})


def example2_glue_segments(b0, c1, b1):
    """The four glue segments (name, x_lo, x_hi, y_lo, y_hi)."""
    return [
        ("[-b0,-c1]->[-1,-c1]", -b0, -c1, -1.0, -c1),
        ("[-b1,0]->[c1,1]", -b1, 0.0, c1, 1.0),
        ("[0,b1]->[-1,-c1]", 0.0, b1, -1.0, -c1),
        ("[c1,b0]->[c1,1]", c1, b0, c1, 1.0),
    ]


def example2_glue_ratios(b0=0.4, c1=0.2, b1=0.1):
    return [(y1 - y0) / (x1 - x0) for _, x0, x1, y0, y1 in example2_glue_segments(b0, c1, b1)]


def build_example2(b0=0.4, k=4.0, c1=0.2, b1=0.1, k2=12.0, N=24):
    """Degree-4 map with an outer Bowen set K1 and an inner one K2 inside [-c1, c1]."""
    if not 0.0 < b1 < c1 < b0 < 1.0:
        raise ParamsInfeasible(f"need 0 < b1 < c1 < b0 < 1, got b1={b1}, c1={c1}, b0={b0}")
    for name, x0, x1, y0, y1 in example2_glue_segments(b0, c1, b1):
        rho = (y1 - y0) / (x1 - x0)
        if not rho > 2.0:
            raise GlueRatioError(f"glue segment {name} has ratio {rho:.6g} <= 2")
    outer = build_skeleton(BowenParams(-1.0, 1.0, b0, k, None, N))
    inner = build_skeleton(BowenParams(-c1, c1, b1, k2, None, N))
    G0, G1 = BowenBranch(outer, 0), BowenBranch(outer, 1)
    H0, H1 = BowenBranch(inner, 0), BowenBranch(inner, 1)
    # glue endpoints come from the skeletons so consecutive pieces share floats
    segs = [make_piece(G0.x_hi, H0.x_lo, -1.0, H0.y_lo, 2.0, 2.0),
            make_piece(H0.x_hi, 0.0, H0.y_hi, 1.0, 2.0, 2.0),
            make_piece(0.0, H1.x_lo, -1.0, H1.y_lo, 2.0, 2.0),
            make_piece(H1.x_hi, G1.x_lo, H1.y_hi, 1.0, 2.0, 2.0)]
    g0 = CompositeBranch([segs[0], H0, segs[1]])
    g1 = CompositeBranch([segs[2], H1, segs[3]])
    fmap = CircleMap([G0, g0, g1, G1], symbols=(0, 2, 3, 1), name="example2")
    return BuiltSystem(
        "example2", fmap,
        skeletons={"K1": outer, "K2": inner},
        bit_symbols={"K1": (0, 1), "K2": (2, 3)},
        k_log_deriv={"K1": LOG2, "K2": LOG2},
        bowen={"K1": (G0, G1), "K2": (H0, H1)},
        params={"b0": b0, "k": k, "c1": c1, "b1": b1, "k2": k2, "N": N,
                "glue_ratios": example2_glue_ratios(b0, c1, b1)})


def build_torus(sys1, sys2):
    """Product system; Cantor sets pair the first skeleton of sys1 with each of sys2."""
    if sys1.is_torus or sys2.is_torus:
        raise ConfigError("torus factors must be circle systems")
    tmap = TorusMap(sys1.map, sys2.map, name=f"{sys1.kind}x{sys2.kind}")
    labels = [(a, b) for a, b in product(list(sys1.skeletons)[:1], sys2.skeletons)]
    return BuiltSystem("torus", tmap, factors=(sys1, sys2), product_labels=labels,
                       lebesgue_invariant=sys1.lebesgue_invariant and sys2.lebesgue_invariant,
                       params={"left": sys1.params, "right": sys2.params})


def product_mass(sys_torus, label):
    """Lebesgue mass of a product Cantor set from its factors' limiting masses."""
    s1, s2 = sys_torus.skeleton(label)
    return cantor_total_measure(s1.params)[0] * cantor_total_measure(s2.params)[0]


def _words(n):
    return product((0, 1), repeat=n)


def gap_image_check(system, max_gen=10, tol=1e-12):
    """Check that gaps and atoms of the skeletons are carried onto their shifted targets.

    For every skeleton label, gap I*_{a w} must map onto I*_w (the central gap when
    w is empty) and atom I_{a w} onto I_w, for generations up to ``max_gen``.
    Returns a report dict; raises ConjugacyViolation listing offending words.
    """
    if system.is_torus:
        reports = [gap_image_check(f, max_gen, tol) for f in system.factors]
        return {"max_residual": max(r["max_residual"] for r in reports),
                "n_checked": sum(r["n_checked"] for r in reports),
                "per_skeleton": {k: v for r in reports for k, v in r["per_skeleton"].items()}}
    fmap = system.map
    worst, checked, bad, per = 0.0, 0, [], {}
    for label, skel in system.skeletons.items():
        depth = min(max_gen, skel.N - 1)
        sk_worst = 0.0
        for n in range(1, depth + 1):
            for bits in _words(n):
                w = bits[1:]
                for kind, src, tgt in (("gap", skel.gap_interval(bits), skel.gap_interval(w)),
                                       ("atom", skel.atom_interval(bits),
                                        skel.atom_interval(w) if w else skel.ambient)):
                    lo, hi = src
                    branch = fmap.branches[fmap.branch_index(0.5 * (lo + hi))]
                    y_lo = branch.piece_at(lo, "right").eval(lo)
                    y_hi = branch.piece_at(hi, "left").eval(hi)
                    r = max(circle_distance(y_lo, tgt[0]), circle_distance(y_hi, tgt[1]))
                    checked += 1
                    sk_worst = max(sk_worst, r)
                    if r > tol:
                        bad.append((label, kind, "".join(map(str, bits))))
        per[label] = sk_worst
        worst = max(worst, sk_worst)
    report = {"max_residual": worst, "n_checked": checked, "per_skeleton": per}
    if bad:
        raise ConjugacyViolation(
            f"{len(bad)} gap/atom images miss their targets by more than {tol}; "
            f"first: {bad[:5]}", words=bad)
    return report


_KNOWN = ("doubling", "affine3", "example1", "example2", "torus")


def build_from_config(spec):
    """Build a system from the ``map`` block of a lab config."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("map spec must be an object with a 'kind'")
    kind = spec["kind"]
    allowed = {
        "doubling": set(),
        "affine3": {"N"},
        "example1": {"b0", "k", "N"},
        "example2": {"b0", "k", "c1", "b1", "k2", "N"},
        "torus": {"left", "right"},
    }
    if kind not in allowed:
        raise ConfigError(f"unknown map kind {kind!r}; expected one of {_KNOWN}")
    extra = set(spec) - allowed[kind] - {"kind"}
    if extra:
        raise ConfigError(f"unexpected keys for {kind}: {sorted(extra)}")
    kw = {key: spec[key] for key in allowed[kind] if key in spec}
    for key, val in kw.items():
        if key in ("left", "right"):
            continue
        if key == "N":
            if not isinstance(val, int) or isinstance(val, bool) or val < 2:
                raise ConfigError(f"map.N must be an integer >= 2, got {val!r}")
        elif not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ConfigError(f"map.{key} must be a number, got {val!r}")
    if kind == "doubling":
        return build_doubling()
    if kind == "affine3":
        return build_reference_affine(**kw)
    if kind == "example1":
        return build_example1(**kw)
    if kind == "example2":
        return build_example2(**kw)
    if "left" not in spec or "right" not in spec:
        raise ConfigError("torus needs 'left' and 'right' map specs")
    return build_torus(build_from_config(spec["left"]), build_from_config(spec["right"]))
