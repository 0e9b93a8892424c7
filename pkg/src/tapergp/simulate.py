"""Exact joint simulation of the multivariate field by dense Cholesky.

Replication ``r`` of a plan with seed ``s`` draws its standard normals from
``PCG64(SeedSequence(s, spawn_key=(r,)))``, so any subset of replications
can be regenerated on its own and the result does not depend on how
replications are distributed over workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covmodel import DEFAULT_DENSE_CAP, ModelConfig, MultiMaternParams
from .geometry import LocationSet, ParameterError
from .sparse import DenseLayout

__all__ = [
    "SimulationPlan",
    "ValidityError",
    "joint_factor",
    "joint_sites",
    "rep_rng",
    "simulate_field",
    "split_joint",
    "write_simulation_csv",
]


class ValidityError(ParameterError):
    """The true covariance is not positive definite on the joint sites."""


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(rep),))))


@dataclass
class SimulationPlan:
    model: ModelConfig | MultiMaternParams
    locs: LocationSet
    extra_sites: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    n_rep: int = 1
    seed: int = 0
    dense_cap: int = DEFAULT_DENSE_CAP

    def __post_init__(self):
        if self.n_rep < 1:
            raise ParameterError("n_rep must be at least 1")
        extra = np.asarray(self.extra_sites, dtype=float).reshape(-1, self.locs.dim)
        self.extra_sites = extra

    @property
    def params(self) -> MultiMaternParams:
        return self.model.params_true if isinstance(self.model, ModelConfig) else self.model


def joint_sites(plan: SimulationPlan) -> LocationSet:
    """Observation sites followed by the extra sites; duplicates are rejected."""
    pts = np.vstack([plan.locs.points, plan.extra_sites])
    return LocationSet(pts)


def joint_factor(plan: SimulationPlan) -> np.ndarray:
    sites = joint_sites(plan)
    cov = DenseLayout(sites, plan.dense_cap, plan.params.p).assemble(plan.params)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValidityError("true covariance is not positive definite on the joint sites") from exc


def simulate_field(plan: SimulationPlan, reps=None, factor: np.ndarray | None = None) -> np.ndarray:
    """Zero-mean draws with the exact joint covariance.

    Returns an array of shape ``(len(reps), (n + n_extra) * p)``, each row
    stacked component-major over the joint site list.  ``reps`` defaults to
    ``range(plan.n_rep)``; ``factor`` may pass a precomputed joint Cholesky
    factor.
    """
    L = joint_factor(plan) if factor is None else factor
    reps = range(plan.n_rep) if reps is None else reps
    N = L.shape[0]
    out = np.empty((len(reps), N))
    for j, r in enumerate(reps):
        xi = rep_rng(plan.seed, r).standard_normal(N)
        out[j] = L @ xi
    return out


def split_joint(sample: np.ndarray, n_obs: int, n_extra: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a joint draw into observation data and ``(n_extra, p)`` extra-site values."""
    sample = np.asarray(sample)
    ntot = n_obs + n_extra
    blocks = sample.reshape(p, ntot) if sample.ndim == 1 else sample.reshape(sample.shape[0], p, ntot)
    obs = blocks[..., :n_obs].reshape(*sample.shape[:-1], p * n_obs)
    extra = np.swapaxes(blocks[..., n_obs:], -1, -2)
    return obs, extra


def write_simulation_csv(samples: np.ndarray, p: int, path, reps=None) -> None:
    """Long-format CSV with columns ``rep,site,component,value`` (one-based site/component)."""
    import csv

    samples = np.atleast_2d(samples)
    reps = range(samples.shape[0]) if reps is None else reps
    nsite = samples.shape[1] // p
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "site", "component", "value"])
        for r, row in zip(reps, samples):
            for k in range(p):
                for a in range(nsite):
                    w.writerow([r, a + 1, k + 1, repr(float(row[k * nsite + a]))])
