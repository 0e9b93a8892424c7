import numpy as np
import pytest

from tapergp.geometry import ParameterError
from tapergp.taper import FAMILIES, TaperSpec, make_taper, support_radius, taper_value, validate_condition4

ALL = ["i", "ii", "iii", "iv"]


class TestTaperValue:
    def test_biv_cross_at_zero(self):
        spec = make_taper("iv", 4.0)
        assert taper_value([0.0, 0.0], 0, 1, spec) == pytest.approx(np.sqrt(6 / 7), rel=1e-15)
        assert taper_value([0.0, 0.0], 0, 1, spec) == pytest.approx(0.9258201, abs=1e-7)

    @pytest.mark.parametrize("family", ALL)
    def test_zero_at_support_boundary(self, family):
        spec = make_taper(family, 4.0)
        for k in range(2):
            for l in range(2):
                assert taper_value([4.0, 0.0], k, l, spec) == 0.0
                assert taper_value([3.0, 3.0], k, l, spec) == 0.0

    def test_wendland1_half_range(self):
        assert taper_value([2.0, 0.0], 0, 0, make_taper("i", 4.0)) == pytest.approx(0.1875, rel=1e-15)

    @pytest.mark.parametrize("family, r, expected", [
        ("ii", 0.5, 0.5**6 * (1 + 3 + 35 / 12)),
        ("iii", 0.5, 0.25 * 1.25),
        ("iv", 0.5, 0.5**5 * 3.75),
    ])
    def test_formulas(self, family, r, expected):
        assert taper_value([r * 10.0, 0.0], 0, 0, make_taper(family, 10.0)) == pytest.approx(expected, rel=1e-14)

    def test_biv_second_component(self):
        spec = make_taper("iv", 1.0)
        assert taper_value([0.5, 0.0], 1, 1, spec) == pytest.approx(0.5**5 * 3.5, rel=1e-14)

    def test_infinite_range_is_one(self):
        spec = make_taper("i", "inf")
        assert spec.is_inf
        np.testing.assert_array_equal(spec.block(np.array([0.0, 1e6]), 0, 1), [1.0, 1.0])

    def test_nonfinite_lag(self):
        with pytest.raises(ParameterError):
            taper_value([np.inf, 0.0], 0, 0, make_taper("i", 2.0))

    @pytest.mark.parametrize("family", ALL)
    def test_symmetry(self, family, rng):
        spec = make_taper(family, 3.0)
        h = rng.normal(size=(40, 2)) * 2
        np.testing.assert_array_equal(taper_value(h, 0, 1, spec), taper_value(-h, 1, 0, spec))

    @pytest.mark.parametrize("family", ALL)
    def test_nonincreasing_and_bounded(self, family):
        spec = make_taper(family, 1.0)
        d = np.linspace(0, 1.2, 4001)
        for k in range(2):
            for l in range(2):
                v = spec.block(d, k, l)
                assert np.all(np.diff(v) <= 1e-15)
                assert np.all(np.abs(v) <= 1.0)

    def test_biv_taper_matrix_is_psd(self):
        spec = make_taper("iv", 1.0)
        m0 = np.array([[1.0, np.sqrt(6 / 7)], [np.sqrt(6 / 7), 1.0]])
        assert np.linalg.eigvalsh(m0)[0] > 0
        # the taper matrix function must give PSD matrices on arbitrary point sets
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 2, size=(150, 2))
        dist = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        big = np.block([[spec.block(dist, 0, 0), spec.block(dist, 0, 1)],
                        [spec.block(dist, 1, 0), spec.block(dist, 1, 1)]])
        assert np.linalg.eigvalsh(big)[0] > -1e-10


class TestCondition4:
    @pytest.mark.parametrize("family", ["i", "ii", "iii"])
    def test_univariate_families_hold(self, family):
        holds, bad = validate_condition4(make_taper(family, 5.0))
        assert holds and bad == []
        assert not make_taper(family, 5.0).violates_condition4

    def test_biv_family_fails_on_cross_entry(self):
        holds, bad = validate_condition4(make_taper("iv", 5.0))
        assert not holds
        assert (1, 2) in bad and (2, 1) in bad and (1, 1) not in bad
        assert make_taper("iv", 5.0).violates_condition4


class TestSpec:
    @pytest.mark.parametrize("gamma", [4.0, 10.0, np.inf])
    def test_support_radius(self, gamma):
        assert support_radius(make_taper("i", gamma)) == gamma

    def test_aliases(self):
        assert make_taper("w1", 2.0).family == make_taper("i", 2.0).family
        assert make_taper("sph", 2.0).family == make_taper("iii", 2.0).family
        assert make_taper("biv", 2.0).family == "multivariate_iv"
        assert {a for aliases in FAMILIES.values() for a in aliases} >= set(ALL)

    @pytest.mark.parametrize("gamma", [0.0, -1.0, np.nan])
    def test_invalid_gamma(self, gamma):
        with pytest.raises(ParameterError):
            make_taper("i", gamma)

    def test_unknown_family(self):
        with pytest.raises(ParameterError):
            make_taper("v", 2.0)

    def test_custom_table(self):
        f = lambda r: np.clip(1 - np.asarray(r), 0, None) ** 4 * (1 + 4 * np.asarray(r))  # noqa: E731
        spec = TaperSpec("custom", 2.0, 2, table=[[f, f], [f, f]])
        assert taper_value([1.0, 0.0], 0, 1, spec) == pytest.approx(0.1875)
        assert spec.with_gamma(4.0).gamma == 4.0
