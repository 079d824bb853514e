import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx

from pesinlab import (
    atom_mass_decay,
    birkhoff_lyapunov,
    cylinder_table_empirical,
    cylinder_table_symbolic,
    distortion_ratio,
    entropy_rate,
    lyapunov_integral,
    partition_entropy,
    pesin_defect,
)
from pesinlab.entropy import table_from_counts
from pesinlab.errors import DepthExceeded, UndersampledWarning, UnsupportedVariant
from pesinlab.measures import dirac, lebesgue, mu_K, product_measure

LOG2 = math.log(2)

masses = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda v: sum(v) > 1e-6)


def normalise(v):
    v = np.asarray(v, dtype=float)
    return v / v.sum()


class TestPartitionEntropy:
    @pytest.mark.parametrize("p, h", [((0.5, 0.5), LOG2), ((1.0, 0.0), 0.0), ((0.25,) * 4, 2 * LOG2)])
    def test_values(self, p, h):
        assert partition_entropy(p) == approx(h, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(masses)
    def test_bounded_by_log_p(self, v):
        p = normalise(v)
        assert -1e-15 <= partition_entropy(p) <= math.log(len(p)) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.data())
    def test_join_bounds(self, r, c, data):
        cells = data.draw(st.lists(st.floats(0.0, 1.0), min_size=r * c, max_size=r * c)
                          .filter(lambda v: sum(v) > 1e-6))
        joint = normalise(cells).reshape(r, c)
        h_join = partition_entropy(joint.ravel())
        h_rows = partition_entropy(joint.sum(axis=1))
        h_cols = partition_entropy(joint.sum(axis=0))
        assert h_join <= h_rows + h_cols + 1e-12
        assert h_join >= h_rows - 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 10), st.data())
    def test_concave(self, k, data):
        a = normalise(data.draw(st.lists(st.floats(0, 1), min_size=k, max_size=k).filter(lambda v: sum(v) > 1e-6)))
        b = normalise(data.draw(st.lists(st.floats(0, 1), min_size=k, max_size=k).filter(lambda v: sum(v) > 1e-6)))
        mid = partition_entropy(0.5 * (a + b))
        assert mid >= 0.5 * (partition_entropy(a) + partition_entropy(b)) - 1e-12


class TestSymbolic:
    def test_three_letter_words(self, ex1):
        t = cylinder_table_symbolic(mu_K(ex1), 3)
        assert len(t.codes) == 8 and set(t.masses.tolist()) == {0.125}
        assert t.entropy == 3 * LOG2

    def test_words_use_map_symbols(self, ex2):
        t = cylinder_table_symbolic(mu_K(ex2, "K2"), 2, ex2.map.alphabet_size)
        assert sorted(t.as_dict()) == [(2, 2), (2, 3), (3, 2), (3, 3)]

    def test_rate_is_exact(self, ex1):
        tables = [cylinder_table_symbolic(mu_K(ex1), n) for n in range(1, 17)]
        rate = entropy_rate(tables)
        assert rate.h_final == LOG2
        assert all(b <= a for a, b in zip(rate.h_sequence, rate.h_sequence[1:]))

    def test_torus_additivity(self, ex1, ex2, torus):
        m = product_measure(mu_K(ex1), mu_K(ex2, "K1"))
        t = cylinder_table_symbolic(m, 1, (3, 4))
        assert len(t.codes) == 4 and set(t.masses.tolist()) == {0.25}
        assert t.entropy == math.log(4)
        assert cylinder_table_symbolic(m, 5, (3, 4)).entropy == 5 * math.log(4)

    def test_depth_limit(self, ex1):
        with pytest.raises(DepthExceeded):
            cylinder_table_symbolic(mu_K(ex1, depth=4), 5)

    def test_no_symbolic_lebesgue(self):
        with pytest.raises(UnsupportedVariant):
            cylinder_table_symbolic(lebesgue(), 2)


class TestEmpirical:
    def test_fixed_point_single_word(self, doubling):
        t = cylinder_table_empirical(doubling, 0.0, 100, 4)
        assert t.masses.tolist() == [1.0] and t.entropy == 0.0

    def test_doubling_words_are_uniform(self, doubling):
        rng = np.random.default_rng(5)
        t = cylinder_table_empirical(doubling, rng.uniform(-1, 1, 100), 10 ** 4, 10,
                                     noise=1e-12, rng=rng)
        assert len(t.codes) == 1024
        p = 2.0 ** -10
        sd = math.sqrt(p * (1 - p) / t.n_samples)
        z = np.abs(t.masses - p) / sd
        # sliding windows are correlated, so allow a little slack over 3 sigma
        assert np.mean(z < 3) > 0.98 and z.max() < 5

    def test_undersampled_warning(self):
        with pytest.warns(UndersampledWarning):
            table_from_counts(5, 2, np.arange(20), np.ones(20, dtype=np.int64))

    def test_rate_uses_last_increment(self):
        a = table_from_counts(1, 2, np.arange(2), np.array([50, 50]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UndersampledWarning)
            b = table_from_counts(2, 2, np.arange(3), np.array([40, 40, 20]))
        rate = entropy_rate([a, b])
        assert rate.method == "empirical"
        assert rate.h_final == approx(b.entropy - a.entropy)


class TestLyapunov:
    def test_mu_K(self, ex1):
        assert lyapunov_integral(ex1, mu_K(ex1)) == (LOG2, 0.0)

    def test_doubling_lebesgue(self, doubling):
        assert lyapunov_integral(doubling, lebesgue()) == (LOG2, 0.0)

    def test_birkhoff_doubling(self, doubling):
        assert birkhoff_lyapunov(doubling, 0.3141, 1000) == LOG2

    def test_birkhoff_example1_range(self, ex1):
        x0 = float(np.random.default_rng(2).uniform(-1, 1))
        assert LOG2 <= birkhoff_lyapunov(ex1, x0, 10 ** 5) <= math.log(5)

    def test_torus_is_sum_of_factors(self, ex1, ex2, torus):
        p, n = (0.3141, -0.2718), 2000
        total = birkhoff_lyapunov(torus, p, n)
        parts = birkhoff_lyapunov(ex1, p[0], n) + birkhoff_lyapunov(ex2, p[1], n)
        assert total == approx(parts, abs=1e-14)


class TestPesin:
    def test_example1_mu_K(self, ex1):
        r = pesin_defect(ex1, mu_K(ex1))
        assert r.h_final == LOG2 and r.lyap == LOG2 and abs(r.defect) <= 1e-9
        assert r.invariance_residual <= 2.0 ** -32 + 1e-9

    def test_torus_product(self, ex1, ex2, torus):
        r = pesin_defect(torus, mu_K(torus, ("K", "K1")))
        assert r.h_final == math.log(4) and r.lyap == approx(2 * LOG2, abs=1e-15)
        assert abs(r.defect) <= 1e-9

    def test_dirac_at_fixed_point(self, doubling):
        r = pesin_defect(doubling, dirac(0.0))
        assert r.h_final == 0.0 and r.defect == approx(LOG2, abs=1e-12)
        assert r.pressure == -r.defect and r.invariance_residual == 0.0

    def test_non_fixed_dirac_flagged(self, doubling):
        r = pesin_defect(doubling, dirac(0.3))
        assert r.invariance_residual > 0 and r.warnings

    @pytest.mark.slow
    def test_doubling_lebesgue(self, doubling):
        r = pesin_defect(doubling, lebesgue(), n_orbits=200, orbit_len=1000, seed=3)
        assert abs(r.defect) <= 0.05 and r.ruelle_ok


class TestDistortion:
    def test_affine_has_none(self, affine3):
        for n in (1, 5, 12):
            d = distortion_ratio(affine3, "0" * n)
            assert d.ratio == 1.0 and d.inf_deriv == 3.0 ** n

    def test_example1_grows(self, ex1):
        ratios = [distortion_ratio(ex1, (0,) * n).ratio for n in range(1, 13)]
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))
        assert ratios[7] > 2
        # one step: the steepest gap profile (generation 2, peak 11) over the slope 2 on K
        assert ratios[0] == approx(11 / 2)

    def test_affine_mass_decay(self, affine3):
        m = atom_mass_decay(affine3, 24)
        assert m == approx([2 * (2 / 3) ** n for n in range(25)], rel=1e-15)
        assert affine3.skeleton("K").mass_exact(24) == 2 * Fraction(2, 3) ** 24
