"""Exact and one-taper Gaussian negative log-likelihoods and ML fitting.

Both objectives use the per-observation normalization

    L(theta) = (log det C(theta) + z' C(theta)^{-1} z) / (n p)

with ``C = Sigma`` (exact) or ``C = Sigma o T`` (one-taper).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, solve_triangular

from .covmodel import DEFAULT_DENSE_CAP, MultiMaternParams, ParamBox, unpack
from .geometry import LocationSet, ParameterError
from .optim import nelder_mead
from .sparse import DenseLayout, NotPositiveDefinite, TaperedLayout, factorize, half_solve
from .taper import TaperSpec

__all__ = [
    "FitOptions",
    "FitResult",
    "Objective",
    "default_theta_grid",
    "fit_ml",
    "fit_with_continuation",
    "likelihood_gap",
    "neg_loglik",
    "star_theta_grid",
]

log = logging.getLogger(__name__)


class Objective:
    """Negative log-likelihood of stacked data ``z`` on ``locs``.

    Parameters
    ----------
    kind : {"untapered", "one_taper"}
    locs : LocationSet
    data : array_like, shape (n p,) or (n p, r)
        Observations stacked as ``i = k n + a``.  Several columns are
        evaluated together, sharing one factorization per ``theta``.
    template : MultiMaternParams
        Supplies the fixed smoothness parameters.
    taper : TaperSpec, optional
        Required for ``one_taper``.  An infinite range routes through the
        dense path and reproduces the exact objective.
    """

    def __init__(self, kind: str, locs: LocationSet, data, template: MultiMaternParams,
                 taper: TaperSpec | None = None, dense_cap: int = DEFAULT_DENSE_CAP):
        if kind not in ("untapered", "one_taper"):
            raise ParameterError(f"unknown objective kind {kind!r}")
        if kind == "one_taper" and taper is None:
            raise ParameterError("one_taper objective needs a taper")
        data = np.asarray(data, dtype=float)
        if data.shape[0] != locs.n * template.p:
            raise ParameterError(f"data length {data.shape[0]} != n p = {locs.n * template.p}")
        self.kind = kind
        self.locs = locs
        self.data = data
        self.template = template
        self.taper = taper if kind == "one_taper" else None
        self.dense_cap = dense_cap
        self.eval_count = 0
        self._layout = None

    @property
    def n_obs(self) -> int:
        return self.locs.n * self.template.p

    @property
    def uses_dense(self) -> bool:
        return self.taper is None or self.taper.is_inf

    def with_data(self, data) -> "Objective":
        """Same geometry and taper, new data; shares the cached layout."""
        other = Objective(self.kind, self.locs, data, self.template, self.taper, self.dense_cap)
        other._layout = self._layout
        return other

    def layout(self):
        if self._layout is None:
            if self.uses_dense:
                self._layout = DenseLayout(self.locs, self.dense_cap, self.template.p)
            else:
                self._layout = TaperedLayout(self.locs, self.taper.gamma, self.template.p)
        return self._layout

    def logdet_and_quad(self, params: MultiMaternParams, data=None):
        """``(log det C, z' C^{-1} z)`` for each data column.

        Raises ``NotPositiveDefinite`` (or ``LinAlgError``) for an invalid matrix.
        """
        z = self.data if data is None else np.asarray(data, dtype=float)
        lay = self.layout()
        if self.uses_dense:
            cov = lay.assemble(params)
            chol, _ = cho_factor(cov, lower=True, overwrite_a=True, check_finite=False)
            diag = np.diag(chol)
            if not np.all(diag > 0):
                raise LinAlgError("nonpositive pivot")
            logdet = 2.0 * float(np.log(diag).sum())
            w = solve_triangular(chol, z, lower=True, check_finite=False)
        else:
            K = lay.assemble(params, self.taper)
            fac = factorize(K)
            logdet = fac.logdet
            w = half_solve(fac, z)
        quad = (w * w).sum(axis=0)
        return logdet, quad

    def __call__(self, theta) -> float:
        return neg_loglik(theta, self)


def neg_loglik(theta, obj: Objective):
    """Objective value at ``theta``; ``inf`` if the covariance is not positive definite.

    Returns a float for 1-D data and an array for multi-column data.
    """
    obj.eval_count += 1
    try:
        params = unpack(theta, obj.template)
        logdet, quad = obj.logdet_and_quad(params)
    except (NotPositiveDefinite, LinAlgError, ParameterError) as exc:
        log.debug("rejecting theta=%s: %s", np.asarray(theta), exc)
        return np.inf if obj.data.ndim == 1 else np.full(obj.data.shape[1], np.inf)
    val = (logdet + quad) / obj.n_obs
    return float(val) if np.ndim(val) == 0 else val


@dataclass
class FitOptions:
    max_evals: int = 2000
    xtol: float = 1e-6
    ftol: float = 1e-8
    initial_step: float = 0.1
    keep_trace: bool = False


@dataclass
class FitResult:
    theta_hat: np.ndarray
    objective_value: float
    evaluations: int
    converged: bool
    gamma: float = np.inf
    status: str = "ok"
    trace: list = field(default_factory=list, repr=False)


def fit_ml(obj: Objective, start, box: ParamBox, opts: FitOptions | None = None) -> FitResult:
    """Box-constrained Nelder-Mead minimization of :func:`neg_loglik`.

    Running out of evaluations is not an error: the best point seen is
    returned with ``converged=False``.
    """
    opts = opts or FitOptions()
    if obj.data.ndim != 1:
        raise ParameterError("fitting needs a single data vector")
    start = np.asarray(start, dtype=float)
    if start.shape != (box.q,):
        raise ParameterError(f"start must have length {box.q}")
    if not box.contains(start):
        raise ParameterError("start lies outside the parameter box")
    res = nelder_mead(lambda th: neg_loglik(th, obj), start, box.lower, box.upper,
                      max_evals=opts.max_evals, xtol=opts.xtol, ftol=opts.ftol,
                      initial_step=opts.initial_step, keep_trace=opts.keep_trace)
    gamma = obj.taper.gamma if obj.taper is not None else np.inf
    status = "ok" if res.converged else "max_evals"
    if not np.isfinite(res.fun):
        status = "no_valid_point"
    return FitResult(res.x, res.fun, res.nfev, res.converged, gamma, status, res.trace)


def fit_with_continuation(obj_factory: Callable[[float], Objective], gammas: Sequence[float],
                          box: ParamBox, start, opts: FitOptions | None = None) -> list[FitResult]:
    """Fit along a strictly decreasing sequence of taper ranges.

    Each fit starts from the previous optimum projected onto the box.
    A failing range yields a non-converged entry and the next range
    reuses the last good starting point.
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ParameterError("empty taper range list")
    if any(b >= a for a, b in zip(gammas, gammas[1:])):
        raise ParameterError("taper ranges must be strictly decreasing")
    current = box.project(start)
    results = []
    for g in gammas:
        try:
            res = fit_ml(obj_factory(g), current, box, opts)
        except Exception as exc:  # recorded, the sequence goes on
            log.warning("fit at gamma=%s failed: %s", g, exc)
            res = FitResult(current.copy(), np.inf, 0, False, g, f"error: {exc}")
        results.append(res)
        if np.isfinite(res.objective_value):
            current = box.project(res.theta_hat)
    return results


def default_theta_grid(theta0, box: ParamBox, levels: int = 3, spread: float = 0.2) -> np.ndarray:
    """Full ``levels^q`` lattice over ``theta0 * [1 - spread, 1 + spread]``, clipped to the box."""
    theta0 = np.asarray(theta0, dtype=float)
    axes = [np.linspace(t * (1 - spread), t * (1 + spread), levels) for t in theta0]
    grid = np.array(list(itertools.product(*axes)))
    return box.project(grid)


def star_theta_grid(theta0, box: ParamBox, spread: float = 0.2) -> np.ndarray:
    """``theta0`` plus the ``2 q`` points moving one coordinate by ``±spread``."""
    theta0 = np.asarray(theta0, dtype=float)
    pts = [theta0]
    for i in range(theta0.size):
        for s in (-spread, spread):
            t = theta0.copy()
            t[i] *= 1 + s
            pts.append(t)
    return box.project(np.array(pts))


def likelihood_gap(theta_grid, data, locs: LocationSet, taper: TaperSpec,
                   template: MultiMaternParams, dense_cap: int = DEFAULT_DENSE_CAP):
    """``max_theta |L(theta) - Lbar(theta)|`` over a finite grid.

    ``data`` may hold several replications as columns; one value per column
    is returned.  Grid points where either matrix is not positive definite
    are skipped.
    """
    data = np.asarray(data, dtype=float)
    exact = Objective("untapered", locs, data, template, dense_cap=dense_cap)
    tapered = Objective("one_taper", locs, data, template, taper, dense_cap=dense_cap)
    gaps = np.zeros(data.shape[1]) if data.ndim == 2 else np.zeros(1)
    used = 0
    for theta in np.atleast_2d(theta_grid):
        a = neg_loglik(theta, exact)
        b = neg_loglik(theta, tapered)
        a, b = np.atleast_1d(a), np.atleast_1d(b)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            continue
        used += 1
        gaps = np.maximum(gaps, np.abs(a - b))
    if used == 0:
        raise ParameterError("no grid point gave positive definite matrices")
    return gaps if data.ndim == 2 else float(gaps[0])
