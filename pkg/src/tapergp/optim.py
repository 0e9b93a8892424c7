"""Derivative-free minimization with box constraints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["NelderMeadResult", "nelder_mead"]


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    nfev: int
    converged: bool
    trace: list = field(default_factory=list)


def nelder_mead(fun, x0, lower, upper, max_evals: int = 2000, xtol: float = 1e-6,
                ftol: float = 1e-8, initial_step: float = 0.1, keep_trace: bool = False):
    """Minimize ``fun`` over the box ``[lower, upper]`` by Nelder-Mead.

    Every trial point is projected onto the box before evaluation.  A
    non-finite objective counts as ``+inf`` so the simplex retreats from it.
    Stops when the simplex diameter (max-norm) drops below ``xtol`` or the
    spread of simplex values drops below ``ftol``; the best point seen is
    returned either way.  Projection can flatten the simplex onto a box
    face, so after each stop a fresh simplex is built around the best
    point and the search only ends once such a restart gains less than
    ``ftol``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    q = x0.size
    nfev = 0
    trace = []
    best_x, best_f = x0.copy(), np.inf

    def evaluate(x):
        nonlocal nfev, best_x, best_f
        x = np.clip(x, lower, upper)
        val = float(fun(x))
        nfev += 1
        if not np.isfinite(val):
            val = np.inf
        if keep_trace:
            trace.append((x.copy(), val))
        if val < best_f:
            best_x, best_f = x.copy(), val
        return x, val

    width = upper - lower

    def simplex(x, fx):
        sim = np.empty((q + 1, q))
        fs = np.empty(q + 1)
        sim[0], fs[0] = x, fx
        for i in range(q):
            step = initial_step * abs(x[i]) if x[i] != 0 else 0.05 * width[i]
            step = min(step, 0.5 * width[i])
            y = x.copy()
            y[i] = x[i] + step if x[i] + step <= upper[i] else x[i] - step
            sim[i + 1], fs[i + 1] = evaluate(y)
        return sim, fs

    sim, fs = simplex(*evaluate(x0))
    converged = False
    restart_from = np.inf
    while nfev < max_evals:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diam = np.max(np.abs(sim[1:] - sim[0]))
        spread = fs[-1] - fs[0] if np.isfinite(fs[-1]) else np.inf
        if diam < xtol or spread < ftol:
            if not restart_from - best_f >= ftol or nfev + q > max_evals:
                converged = restart_from - best_f < ftol
                break
            restart_from = best_f
            sim, fs = simplex(best_x.copy(), best_f)
            continue

        centroid = sim[:-1].mean(axis=0)
        xr, fr = evaluate(centroid + (centroid - sim[-1]))
        if fr < fs[0]:
            xe, fe = evaluate(centroid + 2.0 * (centroid - sim[-1]))
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        else:
            if fr < fs[-1]:
                xc, fc = evaluate(centroid + 0.5 * (xr - centroid))
                accept = fc <= fr
            else:
                xc, fc = evaluate(centroid + 0.5 * (sim[-1] - centroid))
                accept = fc < fs[-1]
            if accept:
                sim[-1], fs[-1] = xc, fc
            else:
                for j in range(1, q + 1):
                    if nfev >= max_evals:
                        break
                    sim[j], fs[j] = evaluate(sim[0] + 0.5 * (sim[j] - sim[0]))

    return NelderMeadResult(best_x, best_f, nfev, converged, trace)
