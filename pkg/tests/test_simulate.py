import csv

import numpy as np
import pytest

from tapergp.covmodel import MultiMaternParams
from tapergp.geometry import LocationSet, ParameterError
from tapergp.simulate import (
    SimulationPlan,
    ValidityError,
    joint_sites,
    rep_rng,
    simulate_field,
    split_joint,
    write_simulation_csv,
)
from tapergp.sparse import assemble_dense


class TestSimulateField:
    def test_scalar_variance(self):
        params = MultiMaternParams(rho=[[1.0]], sill=[[2.0]], nu=[[0.5]])
        R = 100_000
        x = simulate_field(SimulationPlan(params, LocationSet([[0.0, 0.0]]), n_rep=R, seed=3))[:, 0]
        assert abs(x.mean()) < 3 * 2 / np.sqrt(R)
        # var of the sample variance is 2 s^2 / R with s = 4
        assert abs(x.var() - 4.0) < 3 * 4 * np.sqrt(2 / R)

    def test_covariance_of_pair(self, model_a):
        locs = LocationSet([[0.0, 0.0], [1.0, 0.0]])
        R = 40_000
        X = simulate_field(SimulationPlan(model_a, locs, n_rep=R, seed=11))
        S = assemble_dense(model_a.params_true, locs)
        C = X.T @ X / R
        # Wick: var(x_i x_j) = S_ii S_jj + S_ij^2
        band = 4 * np.sqrt((np.outer(np.diag(S), np.diag(S)) + S**2) / R)
        assert np.all(np.abs(C - S) < band)

    def test_reproducible_and_subset_independent(self, model_b, grid4):
        plan = SimulationPlan(model_b, grid4, n_rep=6, seed=21)
        full = simulate_field(plan)
        np.testing.assert_array_equal(full, simulate_field(plan))
        np.testing.assert_array_equal(full[[4, 1]], simulate_field(plan, [4, 1]))

    def test_rep_streams_differ(self):
        a = rep_rng(5, 0).standard_normal(4)
        b = rep_rng(5, 1).standard_normal(4)
        c = rep_rng(6, 0).standard_normal(4)
        assert not np.allclose(a, b) and not np.allclose(a, c)
        np.testing.assert_array_equal(a, rep_rng(5, 0).standard_normal(4))

    def test_invalid_truth_rejected(self):
        params = MultiMaternParams(rho=[[5.0, 3.0], [3.0, 4.0]], sill=[[1.0, 1.5], [1.5, 1.0]],
                                   nu=[[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(ValidityError):
            simulate_field(SimulationPlan(params, LocationSet([[0.0, 0.0], [1.0, 0.0]])))

    def test_plan_errors(self, model_a, grid4):
        with pytest.raises(ParameterError):
            SimulationPlan(model_a, grid4, n_rep=0)
        with pytest.raises(ParameterError):
            joint_sites(SimulationPlan(model_a, grid4, extra_sites=grid4.points[:1]))


class TestSplitJoint:
    def test_single_and_stacked(self):
        n, k, p = 3, 2, 2
        sample = np.arange((n + k) * p, dtype=float)
        obs, extra = split_joint(sample, n, k, p)
        np.testing.assert_array_equal(obs, [0, 1, 2, 5, 6, 7])
        np.testing.assert_array_equal(extra, [[3, 8], [4, 9]])
        obs2, extra2 = split_joint(np.vstack([sample, sample + 100]), n, k, p)
        assert obs2.shape == (2, 6) and extra2.shape == (2, 2, 2)
        np.testing.assert_array_equal(extra2[1], extra + 100)


class TestSimulationCsv:
    def test_long_format(self, tmp_path):
        samples = np.arange(12, dtype=float).reshape(2, 6) / 7
        path = tmp_path / "sim.csv"
        write_simulation_csv(samples, 2, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["rep", "site", "component", "value"]
        assert len(rows) == 1 + 12
        assert rows[4] == ["0", "1", "2", repr(3 / 7)]
        assert float(rows[-1][3]) == samples[1, 5]
