import numpy as np
import pytest

from tapergp.optim import nelder_mead


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


class TestNelderMead:
    def test_quadratic_interior_minimum(self):
        c = np.array([0.3, -1.2, 2.0])
        res = nelder_mead(lambda x: ((x - c) ** 2).sum(), np.ones(3), -5 * np.ones(3), 5 * np.ones(3),
                          xtol=1e-10, ftol=1e-16)
        assert res.converged
        np.testing.assert_allclose(res.x, c, atol=1e-6)

    def test_rosenbrock(self):
        res = nelder_mead(rosenbrock, [-1.2, 1.0], [-3, -3], [3, 3], max_evals=5000, xtol=1e-9, ftol=1e-14)
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-4)

    def test_minimum_on_boundary(self):
        res = nelder_mead(lambda x: (x[0] + 2) ** 2 + (x[1] - 0.5) ** 2, [0.5, 0.0], [0, -1], [1, 1],
                          xtol=1e-10, ftol=1e-16)
        assert res.x[0] == 0.0
        assert res.x[1] == pytest.approx(0.5, abs=1e-5)

    def test_collapsed_simplex_is_restarted(self):
        # every trial point is projected to x0 = 0, flattening the simplex
        res = nelder_mead(lambda x: (x[0] + 2) ** 2 + (x[1] - 0.5) ** 2, [0.5, 0.0], [0, -1], [1, 1])
        assert res.converged
        np.testing.assert_allclose(res.x, [0.0, 0.5], atol=1e-4)

    def test_never_leaves_box(self):
        seen = []

        def f(x):
            seen.append(x.copy())
            return -x.sum()

        lo, hi = np.array([0.0, 1.0]), np.array([2.0, 3.0])
        res = nelder_mead(f, [1.0, 2.0], lo, hi, max_evals=300)
        pts = np.array(seen)
        assert np.all(pts >= lo) and np.all(pts <= hi)
        np.testing.assert_array_equal(res.x, hi)

    def test_budget_exhausted_returns_best(self):
        res = nelder_mead(rosenbrock, [-1.2, 1.0], [-3, -3], [3, 3], max_evals=20, keep_trace=True)
        assert not res.converged
        assert res.nfev <= 20 + 2
        assert res.fun == min(v for _, v in res.trace)

    def test_non_finite_values_are_avoided(self):
        def f(x):
            return np.nan if x[0] > 0.5 else (x[0] - 0.2) ** 2

        res = nelder_mead(f, [0.4], [0.0], [1.0], xtol=1e-9, ftol=1e-14)
        assert res.x[0] == pytest.approx(0.2, abs=1e-4)
        assert np.isfinite(res.fun)

    def test_value_spread_stops_on_flat_function(self):
        res = nelder_mead(lambda x: 1.0, [0.2, 0.3], [0, 0], [1, 1])
        # initial simplex plus one confirming restart
        assert res.converged and res.nfev == 3 + 2
