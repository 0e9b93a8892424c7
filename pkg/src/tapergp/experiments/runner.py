"""Scenario pipelines, tidy CSV output and quantile summaries.

Every row carries ``scenario, seed, rep, m, n, family, gamma, status``.
Mode-specific columns follow:

``estimate``    converged, evaluations, objective, rho.11 ... sigma.22
``mspe_curve``  mspe_tapered, mspe_untapered, ratio, neighbors_in_range
``predict``     prediction, truth, sq_error, exact_mspe, neighbors_in_range
``theorem1``    gap
``theorem2``    isd, isd_stderr, point_diff

Random streams are keyed by ``(seed, purpose, m)`` and then by replication,
so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ..covmodel import ModelConfig, free_names, unpack
from ..geometry import GridDesign, LocationSet, neighbors_within, sample_perturbed_grid
from ..likelihood import (FitOptions, Objective, default_theta_grid, fit_with_continuation, likelihood_gap,
                          star_theta_grid)
from ..predict import (MspeScenario, KrigingSystem, TrueModel, exact_mspe, integrated_sqerr_difference,
                       mspe_ratio_curve, predict_at)
from ..simulate import SimulationPlan, joint_factor, simulate_field, split_joint
from ..taper import make_taper
from .config import ConfigError, Scenario

__all__ = ["BASE_COLUMNS", "GridRun", "ResultTable", "mode_columns", "run_scenario", "summarize", "write_outputs"]

log = logging.getLogger(__name__)

BASE_COLUMNS = ("scenario", "seed", "rep", "m", "n", "family", "gamma", "status")

_MODE_COLUMNS = {
    "estimate": ("converged", "evaluations", "objective") + free_names(2),
    "mspe_curve": ("mspe_tapered", "mspe_untapered", "ratio", "neighbors_in_range"),
    "predict": ("prediction", "truth", "sq_error", "exact_mspe", "neighbors_in_range"),
    "theorem1": ("gap",),
    "theorem2": ("isd", "isd_stderr", "point_diff"),
}

# stream purposes
_DATA, _LOCS, _MC = 0, 1, 2


def mode_columns(mode: str) -> tuple[str, ...]:
    return BASE_COLUMNS + _MODE_COLUMNS[mode]


def _format(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


@dataclass
class ResultTable:
    columns: tuple
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ConfigError(f"unknown column {name!r}")
        return np.array([r[name] for r in self.rows])

    def where(self, **cond) -> "ResultTable":
        for key in cond:
            if key not in self.columns:
                raise ConfigError(f"unknown column {key!r}")
        rows = [r for r in self.rows if all(r[k] == v for k, v in cond.items())]
        return ResultTable(self.columns, rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_format(r[c]) for c in self.columns])

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            rows = [dict(zip(header, map(_parse, rec))) for rec in reader]
        return cls(header, rows)


def _sub_seed(seed: int, purpose: int, m: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(purpose, int(m)))
    return int(ss.generate_state(1, np.uint64)[0])


class GridRun:
    """Locations, random streams and the shared joint factor for one grid size.

    With ``delta = 1`` the design is fixed and the joint Cholesky factor is
    computed once; otherwise every replication draws its own locations.
    """

    def __init__(self, s: Scenario, cfg: ModelConfig, m: int, extra=None):
        self.s, self.cfg, self.m = s, cfg, m
        self.design = GridDesign(m, s.delta, s.spacing)
        self.data_seed = _sub_seed(s.seed, _DATA, m)
        self.loc_seed = _sub_seed(s.seed, _LOCS, m)
        self.extra = np.empty((0, 2)) if extra is None else np.asarray(extra, dtype=float)
        self._fixed = sample_perturbed_grid(self.design) if s.delta == 1.0 else None

    @cached_property
    def factor(self):
        return None if self._fixed is None else joint_factor(self.plan(self._fixed))

    @property
    def n(self) -> int:
        return self.design.n

    def plan(self, locs: LocationSet) -> SimulationPlan:
        return SimulationPlan(self.cfg, locs, self.extra, self.s.n_rep, self.data_seed)

    def locations(self, rep: int) -> LocationSet:
        if self._fixed is not None:
            return self._fixed
        return sample_perturbed_grid(self.design, np.random.SeedSequence(self.loc_seed, spawn_key=(rep,)))

    def samples(self, reps, locs: LocationSet) -> np.ndarray:
        """Joint draws of ``reps`` on ``locs`` plus the extra sites, one row per replication."""
        return simulate_field(self.plan(locs), reps, self.factor if locs is self._fixed else None)

    def draw(self, rep: int, locs: LocationSet | None = None):
        """Observation vector and ``(n_extra, p)`` extra-site values of replication ``rep``."""
        locs = self.locations(rep) if locs is None else locs
        sample = self.samples([rep], locs)[0]
        return split_joint(sample, locs.n, self.extra.shape[0], self.cfg.p)


def _row(s: Scenario, rep, g: GridRun, family, gamma, status="ok", **values) -> dict:
    row = {"scenario": s.name, "seed": s.seed, "rep": rep, "m": g.m, "n": g.n,
           "family": family, "gamma": float(gamma), "status": status}
    for c in _MODE_COLUMNS[s.mode]:
        row[c] = values.get(c, np.nan)
    return row


def _fit_options(s: Scenario) -> FitOptions:
    return FitOptions(max_evals=s.max_evals, xtol=s.xtol, ftol=s.ftol, initial_step=s.initial_step)


def _continuation(s: Scenario, cfg: ModelConfig, locs, z, family):
    gammas = sorted(s.gammas, reverse=True)
    template = cfg.params_true

    def factory(gm):
        if np.isinf(gm):
            return Objective("untapered", locs, z, template)
        return Objective("one_taper", locs, z, template, make_taper(family, gm, cfg.p))

    return fit_with_continuation(factory, gammas, cfg.box, cfg.theta0, _fit_options(s))


def _estimate_rep(s, cfg, g: GridRun, rep):
    locs = g.locations(rep)
    z, _ = g.draw(rep, locs)
    rows = []
    for fam in s.families:
        for res in _continuation(s, cfg, locs, z, fam):
            vals = dict(zip(free_names(cfg.p), map(float, res.theta_hat)))
            rows.append(_row(s, rep, g, fam, res.gamma, res.status, converged=bool(res.converged),
                             evaluations=int(res.evaluations), objective=float(res.objective_value), **vals))
    return rows


def _mspe_rep(s, cfg, g: GridRun, rep):
    locs = g.locations(rep)
    rows = []
    for fam in s.families:
        scen = MspeScenario(cfg.params_true, fam, locs, tuple(s.site), target=s.target - 1)
        for r in mspe_ratio_curve(s.gammas, scen):
            rows.append(_row(s, rep, g, fam, r.pop("gamma"), **r))
    return rows


def _predict_rep(s, cfg, g: GridRun, rep):
    locs = g.locations(rep)
    z, extra = g.draw(rep, locs)
    t = s.target - 1
    truth_val = float(extra[0, t])
    site = np.asarray(s.site, dtype=float)
    tm = TrueModel(locs, cfg.params_true)
    rows = []
    for fam in s.families:
        if s.plugin:
            fits = {res.gamma: unpack(res.theta_hat, cfg.params_true) for res in _continuation(s, cfg, locs, z, fam)}
        for gm in s.gammas:
            params = fits[float(gm)] if s.plugin else cfg.params_true
            taper = None if np.isinf(gm) else make_taper(fam, gm, cfg.p)
            sys = KrigingSystem(locs, params, taper, t)
            pred = predict_at(site, sys, z)
            count, _ = neighbors_within(locs, site, gm)
            rows.append(_row(s, rep, g, fam, gm, prediction=pred, truth=truth_val,
                             sq_error=(pred - truth_val) ** 2, exact_mspe=exact_mspe(site, sys, tm),
                             neighbors_in_range=count))
    return rows


def _theta_grid(s: Scenario, cfg: ModelConfig):
    if s.gap_grid == "lattice":
        return default_theta_grid(cfg.theta0, cfg.box, 3, s.gap_spread)
    return star_theta_grid(cfg.theta0, cfg.box, s.gap_spread)


def _theorem1(s, cfg, g: GridRun, gamma, reps, pool):
    grid = _theta_grid(s, cfg)
    rows = []
    for fam in s.families:
        taper = make_taper(fam, gamma, cfg.p)
        if s.delta == 1.0:
            # one factorization per theta serves all replications
            locs = g.locations(0)
            data = g.samples(reps, locs).T
            gaps = likelihood_gap(grid, data, locs, taper, cfg.params_true)
        else:
            def one(rep):
                locs = g.locations(rep)
                return likelihood_gap(grid, g.draw(rep, locs)[0], locs, taper, cfg.params_true)
            gaps = list(pool(one, reps))
        rows += [_row(s, r, g, fam, gamma, gap=float(v)) for r, v in zip(reps, gaps)]
    return rows


def _mc_sites(s: Scenario, m: int) -> np.ndarray:
    rng = np.random.default_rng(_sub_seed(s.seed, _MC, m))
    half = m * s.spacing
    return rng.uniform(-half, half, size=(s.n_mc, 2))


def _theorem2_rep(s, cfg, g: GridRun, gamma, rep):
    locs = g.locations(rep)
    z, extra = g.draw(rep, locs)
    t = s.target - 1
    site = np.asarray(s.site, dtype=float)
    unt = KrigingSystem(locs, cfg.params_true, None, t)
    rows = []
    for fam in s.families:
        tap = KrigingSystem(locs, cfg.params_true, make_taper(fam, gamma, cfg.p), t)
        isd, se = integrated_sqerr_difference(unt, tap, z, g.extra[1:], extra[1:, t])
        eu = predict_at(site, unt, z) - extra[0, t]
        et = predict_at(site, tap, z) - extra[0, t]
        rows.append(_row(s, rep, g, fam, gamma, isd=isd, isd_stderr=se, point_diff=abs(eu**2 - et**2)))
    return rows


def _safe(fn, s: Scenario, g: GridRun, rep, gammas, families):
    """Run a task for one replication (or a list of them); failures become status rows."""
    try:
        return fn(rep)
    except Exception as exc:  # recorded per row, the run goes on
        log.warning("scenario %s rep %s failed: %s", s.name, rep, exc)
        msg = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
        reps = rep if isinstance(rep, list) else [rep]
        return [_row(s, r, g, fam, gm, msg) for fam in families for r in reps for gm in gammas]


def run_scenario(s: Scenario, workers: int | None = None) -> ResultTable:
    """Run all replications of ``s`` and collect a tidy table.

    ``workers`` overrides ``s.workers``.  Rows are ordered by grid size,
    replication, family and range irrespective of the worker count.
    """
    workers = s.workers if workers is None else workers
    cfg = s.model_config()
    table = ResultTable(mode_columns(s.mode))

    with ThreadPoolExecutor(max_workers=workers) if workers > 1 else _Serial() as ex:
        pool = ex.map
        if s.mode in ("theorem1", "theorem2"):
            pairs = list(zip(s.ms, s.gammas))
        else:
            pairs = [(m, None) for m in s.ms]
        for m, gamma in pairs:
            if s.mode == "predict":
                g = GridRun(s, cfg, m, extra=[s.site])
            elif s.mode == "theorem2":
                g = GridRun(s, cfg, m, extra=np.vstack([s.site, _mc_sites(s, m)]))
            else:
                g = GridRun(s, cfg, m)
            reps = list(range(s.n_rep))
            if s.mode == "mspe_curve" and s.delta == 1.0:
                reps = [0]  # deterministic design
            if s.mode == "theorem1":
                table.rows += _safe(lambda _: _theorem1(s, cfg, g, gamma, reps, pool), s, g, reps, (gamma,), s.families)
                continue
            fn = {
                "estimate": lambda r: _estimate_rep(s, cfg, g, r),
                "mspe_curve": lambda r: _mspe_rep(s, cfg, g, r),
                "predict": lambda r: _predict_rep(s, cfg, g, r),
                "theorem2": lambda r: _theorem2_rep(s, cfg, g, gamma, r),
            }[s.mode]
            gl = s.gammas if gamma is None else (gamma,)
            for rows in pool(lambda r: _safe(fn, s, g, r, gl, s.families), reps):
                table.rows += rows
    return table


class _Serial:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    @staticmethod
    def map(fn, items):
        return map(fn, items)


def _versions() -> dict:
    import numba
    import scipy

    from .. import __version__

    return {"tapergp": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def write_outputs(table: ResultTable, s: Scenario, out_dir, stem: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and the ``<stem>.meta.json`` sidecar; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or s.name
    csv_path = out / f"{stem}.csv"
    meta_path = out / f"{stem}.meta.json"
    table.to_csv(csv_path)
    meta = {
        "scenario": s.name,
        "mode": s.mode,
        "seed": s.seed,
        "config_sha256": s.config_hash(),
        "config": s.to_text(),
        "columns": list(table.columns),
        "rows": len(table),
        "rng": "PCG64; replication r of stream key k uses SeedSequence(k, spawn_key=(r,))",
        "versions": _versions(),
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


QUANTILES = (5, 25, 50, 75, 95)


def summarize(table: ResultTable, by=None, values=None) -> ResultTable:
    """Per-group quantiles (5, 25, 50, 75, 95 %) of numeric result columns.

    Parameters
    ----------
    table : ResultTable
    by : sequence of str, optional
        Grouping columns; defaults to those of ``family, m, n, gamma``
        present in the table.
    values : sequence of str, optional
        Columns to summarize; defaults to every numeric column outside the
        base schema.

    Non-finite entries (failed rows) are left out of the quantiles and of
    ``count``.
    """
    cols = table.columns
    by = [c for c in ("family", "m", "n", "gamma") if c in cols] if by is None else list(by)
    if values is None:
        values = [c for c in cols if c not in BASE_COLUMNS and c not in by
                  and table.rows and all(isinstance(r[c], (int, float)) and not isinstance(r[c], bool)
                                         for r in table.rows)]
    for c in list(by) + list(values):
        if c not in cols:
            raise ConfigError(f"unknown column {c!r}")
    groups: dict[tuple, list] = {}
    for r in table.rows:
        groups.setdefault(tuple(r[c] for c in by), []).append(r)
    qcols = tuple(f"q{q:02d}" for q in QUANTILES)
    out = ResultTable(tuple(by) + ("parameter", "count") + qcols)
    for key, rows in groups.items():
        for v in values:
            x = np.array([r[v] for r in rows], dtype=float)
            x = x[np.isfinite(x)]
            qs = np.percentile(x, QUANTILES) if x.size else np.full(len(QUANTILES), np.nan)
            row = dict(zip(by, key))
            row.update(parameter=v, count=int(x.size))
            row.update(zip(qcols, map(float, qs)))
            out.rows.append(row)
    return out
