"""Kriging of one field component with exact or tapered covariances.

For a target component ``t`` (zero-based; the first component by default)
the untapered predictor at ``x`` is ``sigma(x)' Sigma^{-1} z`` with
``sigma(x)_i = c_{tk}(x - x_a)``; the tapered predictor replaces both
``sigma(x)`` and ``Sigma`` by their tapered versions.  The MSPE of any
linear predictor ``w' z`` under the true model is

    c_tt(0) - 2 w' sigma_0(x) + w' Sigma_0 w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .covmodel import DEFAULT_DENSE_CAP, MultiMaternParams, cross_covariance_matrix
from .geometry import LocationSet, ParameterError, neighbors_within
from .sparse import DenseLayout, TaperedLayout, factorize
from .taper import TaperSpec

__all__ = [
    "KrigingSystem",
    "MspeScenario",
    "PredictionReport",
    "TrueModel",
    "exact_mspe",
    "integrated_sqerr_difference",
    "mspe_ratio_curve",
    "predict_at",
]


class KrigingSystem:
    """Factorized kriging system for predicting component ``target``.

    With ``taper=None`` (or an infinite range) the exact covariance is
    factorized densely; otherwise the tapered matrix goes through the
    sparse Cholesky.  Immutable after construction.
    """

    def __init__(self, locs: LocationSet, params: MultiMaternParams, taper: TaperSpec | None = None,
                 target: int = 0, dense_cap: int = DEFAULT_DENSE_CAP):
        if not 0 <= target < params.p:
            raise ParameterError(f"target component {target} out of range")
        self.locs = locs
        self.params = params
        self.taper = None if taper is None or taper.is_inf else taper
        self.target = target
        if self.taper is None:
            cov = DenseLayout(locs, dense_cap, params.p).assemble(params)
            self._chol = cho_factor(cov, lower=True, overwrite_a=True, check_finite=False)
            self.factor = None
        else:
            K = TaperedLayout(locs, self.taper.gamma, params.p).assemble(params, self.taper)
            self.factor = factorize(K)

    @property
    def mode(self) -> str:
        return "untapered" if self.taper is None else "tapered"

    @property
    def order(self) -> int:
        return self.locs.n * self.params.p

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.order:
            raise ParameterError(f"right-hand side has {rhs.shape[0]} rows, expected {self.order}")
        if self.factor is None:
            return cho_solve(self._chol, rhs, check_finite=False)
        return self.factor.solve(rhs)

    def cross_vector(self, x) -> np.ndarray:
        """``sigma(x)`` (or ``k(x)`` when tapered); a matrix with one column per site."""
        single = np.ndim(x) == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.locs.dim:
            raise ParameterError("site dimension does not match locations")
        dist = cdist(self.locs.points, x)
        blocks = []
        for k in range(self.params.p):
            blk = cross_covariance_matrix(dist, self.params, self.target, k)
            if self.taper is not None:
                blk = blk * self.taper.block(dist, self.target, k)
            blocks.append(blk)
        out = np.vstack(blocks)
        return out[:, 0] if single else out

    def weights(self, x) -> np.ndarray:
        return self.solve(self.cross_vector(x))


def predict_at(x, sys: KrigingSystem, z) -> float | np.ndarray:
    """Kriging prediction ``w' z`` at one site or a stack of sites."""
    z = np.asarray(z, dtype=float)
    if z.shape[0] != sys.order:
        raise ParameterError(f"data length {z.shape[0]} != {sys.order}")
    alpha = sys.solve(z)
    cv = sys.cross_vector(x)
    if cv.ndim == 1:
        nz = np.flatnonzero(cv)
        return float(cv[nz] @ alpha[nz])
    return cv.T @ alpha


class TrueModel:
    """Covariances under the data-generating parameters, cached per site set."""

    def __init__(self, locs: LocationSet, truth: MultiMaternParams, dense_cap: int = DEFAULT_DENSE_CAP):
        self.locs = locs
        self.truth = truth
        self.cov = DenseLayout(locs, dense_cap, truth.p).assemble(truth)

    def cross_vector(self, x, target: int = 0) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dist = cdist(self.locs.points, x)[:, 0]
        return np.concatenate([cross_covariance_matrix(dist, self.truth, target, k)
                               for k in range(self.truth.p)])


def exact_mspe(x, sys: KrigingSystem, truth: MultiMaternParams | TrueModel,
               dense_cap: int = DEFAULT_DENSE_CAP) -> float:
    """Mean squared prediction error of ``sys`` at ``x`` under ``truth``."""
    tm = truth if isinstance(truth, TrueModel) else TrueModel(sys.locs, truth, dense_cap)
    w = sys.weights(x)
    s0 = tm.cross_vector(x, sys.target)
    c0 = tm.truth.sill[sys.target, sys.target] ** 2
    return float(c0 - 2.0 * w @ s0 + w @ (tm.cov @ w))


@dataclass
class PredictionReport:
    site: np.ndarray
    value: float
    exact_mspe: float | None
    neighbors_in_range: int


@dataclass
class MspeScenario:
    """Inputs of an MSPE-ratio curve.

    ``weights_params`` builds the kriging weights (the truth unless a plug-in
    estimate is supplied); ``truth`` is the data-generating model.
    """

    truth: MultiMaternParams
    family: str
    locs: LocationSet
    site: tuple = (0.0, 0.0)
    weights_params: MultiMaternParams | None = None
    target: int = 0


def mspe_ratio_curve(gammas, scenario: MspeScenario) -> list[dict]:
    """Tapered over untapered MSPE for each taper range.

    Rows carry ``gamma, mspe_tapered, mspe_untapered, ratio,
    neighbors_in_range``; ``gamma = inf`` reuses the untapered value so the
    ratio is exactly one.
    """
    from .taper import make_taper

    params = scenario.weights_params or scenario.truth
    tm = TrueModel(scenario.locs, scenario.truth)
    site = np.asarray(scenario.site, dtype=float)
    base_sys = KrigingSystem(scenario.locs, params, None, scenario.target)
    base = exact_mspe(site, base_sys, tm)
    rows = []
    for g in gammas:
        g = float(g)
        if np.isinf(g):
            mt = base
        else:
            sys = KrigingSystem(scenario.locs, params, make_taper(scenario.family, g, params.p), scenario.target)
            mt = exact_mspe(site, sys, tm)
        count, _ = neighbors_within(scenario.locs, site, g)
        rows.append({"gamma": g, "mspe_tapered": mt, "mspe_untapered": base,
                     "ratio": mt / base, "neighbors_in_range": count})
    return rows


def integrated_sqerr_difference(untapered: KrigingSystem, tapered: KrigingSystem, z, sites,
                                z_true) -> tuple[float, float]:
    """Monte Carlo estimate of ``|int e_u^2 f - int e_t^2 f|``.

    ``sites`` are draws from the density ``f`` and ``z_true`` the target
    component at those sites (jointly simulated with ``z``).  Both
    predictors use the same sites.  Returns the estimate and the standard
    error of the mean paired difference.
    """
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    z_true = np.asarray(z_true, dtype=float).ravel()
    n_mc = sites.shape[0]
    if n_mc < 2:
        raise ParameterError("need at least two Monte Carlo sites")
    if z_true.shape[0] != n_mc:
        raise ParameterError("one true value per site is required")
    eu = np.atleast_1d(predict_at(sites, untapered, z)) - z_true
    et = np.atleast_1d(predict_at(sites, tapered, z)) - z_true
    diff = eu**2 - et**2
    return float(abs(diff.mean())), float(diff.std(ddof=1) / np.sqrt(n_mc))
