import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx

from pesinlab import (
    BowenParams,
    atom_interval,
    build_skeleton,
    cantor_total_measure,
    gap_interval,
    locate,
    mu_K_cylinder,
    sample_mu_K,
)
from pesinlab.cantor import BowenBranch, CantorSkeleton, atom_depth_array
from pesinlab.errors import GapOverflow, GapRatioError, ParamsInfeasible, WordTooLong


@pytest.fixture(scope="module")
def skel():
    return build_skeleton(BowenParams(N=24))


def subdivide(lo, hi, b0, k, depth):
    """Oracle: materialise every atom by explicit centred-gap removal in exact arithmetic."""
    atoms = [(Fraction(lo), Fraction(hi))]
    for n in range(depth):
        gap = 2 * Fraction(b0) if n == 0 else Fraction(1) / (k * n * n * 2 ** n)
        nxt = []
        for a, b in atoms:
            c = (a + b) / 2
            nxt.extend([(a, c - gap / 2), (c + gap / 2, b)])
        atoms = nxt
    return atoms


class TestSkeleton:
    def test_lengths_small_case(self):
        s = build_skeleton(BowenParams(N=3))
        assert s.L.tolist() == [2.0, 0.75, 0.3125, 0.1484375]

    @pytest.mark.parametrize("depth", [1, 4, 8])
    def test_against_subdivision_oracle(self, skel, depth):
        oracle = subdivide(-1, 1, Fraction(1, 4), 4, depth)
        words = list(product((0, 1), repeat=depth))
        for w, (a, b) in zip(words, oracle):
            lo, hi = skel.atom_interval(w)
            assert lo == approx(float(a), abs=1e-15)
            assert hi == approx(float(b), abs=1e-15)

    @pytest.mark.parametrize("word, interval", [
        ("0", (-1.0, -0.25)),
        ("1", (0.25, 1.0)),
        ("01", (-0.5625, -0.25)),
    ])
    def test_atoms(self, skel, word, interval):
        assert atom_interval(skel, word) == interval

    def test_gaps(self, skel):
        assert gap_interval(skel, "0") == (-0.6875, -0.5625)
        assert gap_interval(skel, "") == (-0.25, 0.25)

    def test_word_too_long(self, skel):
        with pytest.raises(WordTooLong):
            skel.atom_interval("0" * 25)
        with pytest.raises(WordTooLong):
            skel.gap_interval("0" * 24)

    def test_gap_overflow(self):
        with pytest.raises(GapOverflow):
            CantorSkeleton(-1.0, 1.0, [0.5, 0.8])

    @pytest.mark.parametrize("bits, x", [((0,) * 10, -1.0), ((1,) + (0,) * 9, 0.25)])
    def test_left_endpoints(self, skel, bits, x):
        assert skel.atom_interval(bits)[0] == x
        pts = skel.left_endpoints(10)
        assert pts[int("".join(map(str, bits)), 2)] == x


class TestParams:
    def test_zeta_two_budget(self):
        with pytest.raises(ParamsInfeasible, match="sum of alpha_n"):
            build_skeleton(BowenParams(b0=0.25, k=1))

    def test_not_decreasing(self):
        with pytest.raises(ParamsInfeasible, match="not decreasing"):
            build_skeleton(BowenParams(k=None, alphas=(0.3, 0.4, 0.1), N=4))

    def test_first_alpha_bound(self):
        with pytest.raises(ParamsInfeasible, match="alpha_1 < 2 b0"):
            build_skeleton(BowenParams(b0=0.05, k=1.5))

    @pytest.mark.parametrize("b0", [0.0, 1.0, -0.1])
    def test_b0_range(self, b0):
        with pytest.raises(ParamsInfeasible):
            build_skeleton(BowenParams(b0=b0))

    def test_explicit_schedule_reports_tail(self):
        alphas = tuple(0.05 * 0.95 ** n for n in range(30))
        s = build_skeleton(BowenParams(k=None, alphas=alphas, N=24))
        assert s.report.tail_ratio_ok
        assert s.report.alpha_sum == approx(math.fsum(alphas))


class TestTotalMeasure:
    def test_closed_form_against_partial_sum_oracle(self):
        value, tail = cantor_total_measure(BowenParams())
        assert value == approx(1.5 - math.pi ** 2 / 24, abs=1e-15)
        assert tail == 0.0
        m = 10 ** 7
        n = np.arange(m, 0, -1, dtype=float)
        partial = float(np.sum(1.0 / n ** 2))
        lo = 1.5 - (partial + 1.0 / m) / 4
        hi = 1.5 - (partial + 1.0 / (m + 1)) / 4
        assert lo - 1e-9 <= value <= hi + 1e-9

    def test_large_k_limit(self):
        assert cantor_total_measure(BowenParams(k=1e12))[0] == approx(1.5, abs=1e-11)

    def test_mass_identity_to_generation_forty(self):
        s = build_skeleton(BowenParams(N=41))
        for n in range(1, 41):
            expected = 1.5 - math.fsum(1 / (4 * j * j) for j in range(1, n))
            assert abs(s.mass(n) - expected) < 1e-12

    def test_masses_decrease_to_the_limit(self, skel):
        masses = [skel.mass(n) for n in range(skel.N + 1)]
        assert all(b < a for a, b in zip(masses, masses[1:]))
        assert min(masses) > cantor_total_measure(skel.params)[0]

    def test_exact_skeleton(self):
        s = CantorSkeleton.from_gaps(-1, 1, [Fraction(2, 3 ** (n + 1)) for n in range(12)])
        for n in range(1, 13):
            assert s.mass_exact(n) == 2 * Fraction(2, 3) ** n


class TestStructure:
    def test_nesting_and_disjoint_gaps(self):
        s = build_skeleton(BowenParams(N=10))
        gaps = []
        for n in range(s.N):
            for w in product((0, 1), repeat=n):
                lo, hi = s.atom_interval(w)
                glo, ghi = s.gap_interval(w)
                c0, c1 = s.atom_interval(w + (0,)), s.atom_interval(w + (1,))
                assert lo == c0[0] and c0[1] == glo and ghi == c1[0] and c1[1] == hi
                assert lo < glo < ghi < hi
                gaps.append((glo, ghi))
        gaps.sort()
        assert all(a[1] <= b[0] for a, b in zip(gaps, gaps[1:]))

    @pytest.mark.parametrize("x, kind, word", [
        (0.0, "central_gap", ()),
        (-1.0, "atom", (0,) * 24),
        (-0.6, "gap", (0,)),
        (1.5, "outside", ()),
    ])
    def test_locate(self, skel, x, kind, word):
        loc = locate(skel, x)
        assert loc.kind == kind and loc.word == word

    def test_sample_locate_round_trip(self, skel, rng):
        bits = rng.integers(0, 2, (300, skel.N))
        for b in bits:
            x = skel.atom_interval(b)[0]
            loc = locate(skel, x)
            assert loc.kind == "atom" and loc.word == tuple(b.tolist())
        xs = sample_mu_K(skel, rng, skel.N, 500)
        assert np.all(atom_depth_array(skel, xs) == skel.N)

    def test_first_bit_is_fair(self, skel):
        xs = sample_mu_K(skel, np.random.default_rng(7), 16, 40000)
        ones = int(np.sum(xs > 0))
        # binomial(40000, 1/2) has sd 100
        assert abs(ones - 20000) < 400

    def test_sampler_matches_descend(self, skel):
        r1, r2 = np.random.default_rng(3), np.random.default_rng(3)
        xs = sample_mu_K(skel, r1, 20, 50)
        bits = r2.integers(0, 2, (50, 20))
        assert xs.tolist() == [skel.descend(b)[0] for b in bits]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=60))
def test_cylinder_mass(word):
    assert mu_K_cylinder(word) == 2.0 ** -len(word)


def test_cylinder_mass_examples():
    assert mu_K_cylinder("0") == 0.5
    assert mu_K_cylinder("0110") == 1 / 16
    with pytest.raises(ValueError):
        mu_K_cylinder("")


class TestBowenBranch:
    def test_class_maxima(self, skel):
        g = BowenBranch(skel, 0)
        assert g.class_max(1) == approx(5.0)
        assert g.class_max(2) == approx(11.0)
        assert g.min_deriv() == 2.0
        assert g.class_ratios[0] == approx(4.0)

    def test_piece_maps_gap_onto_parent_gap(self, skel):
        g = BowenBranch(skel, 1)
        lo, hi = skel.gap_interval((1, 0, 1))
        piece = g.piece_at(0.5 * (lo + hi))
        assert (piece.x_lo, piece.x_hi) == (lo, hi)
        assert (piece.y_lo, piece.y_hi) == skel.gap_interval((0, 1))

    def test_ratio_below_two_rejected(self):
        s = CantorSkeleton(-1.0, 1.0, [0.5, 0.3, 0.1])
        with pytest.raises(GapRatioError):
            BowenBranch(s, 0)

    def test_vectorised_pieces_match(self, skel, rng):
        g = BowenBranch(skel, 0)
        x = rng.uniform(g.x_lo, g.x_hi, 3000)
        params = g.params_array(x)
        for i in range(0, 3000, 97):
            p = g.piece_at(x[i])
            assert tuple(v[i] for v in params[:4]) == (p.x_lo, p.x_hi, p.y_lo, p.y_hi)
