"""Flat ``key = value`` scenario configuration.

Lines are ``key = value``; ``#`` starts a comment; list values are comma
separated.  Recognised keys (defaults in brackets):

=====================  ==========================================================
``name``               scenario name, copied into every output row [``scenario``]
``mode``               estimate | mspe_curve | predict | theorem1 | theorem2
``model``              preset A or B [A]
``taper.family``       one or more of i, ii, iii, iv [i]
``taper.gamma``        taper ranges, ``inf`` allowed [4, 6, 8, 10, inf]
``grid.m``             half-grid counts, one run per value [10]
``grid.delta``         minimum separation in (0, 1] [1]
``grid.spacing``       grid spacing [1]
``seed``               base seed [0]
``n_rep``              replications [100]
``workers``            threads for replications [1]
``fit.max_evals``      Nelder-Mead budget per range [2000]
``fit.xtol``           simplex diameter tolerance [1e-6]
``fit.ftol``           value spread tolerance [1e-8]
``fit.initial_step``   relative initial simplex step [0.1]
``gap.grid``           star | lattice theta grid for the likelihood gap [star]
``gap.spread``         relative half-width of that grid [0.2]
``mc.n_sites``         Monte Carlo sites for the integrated error [100]
``predict.site``       prediction site ``x, y`` [0, 0]
``predict.plugin``     use one-taper estimates as kriging parameters [false]
``predict.target``     predicted component, one-based [1]
``param.<name>``       override a true parameter, e.g. ``param.rho.11 = 4``
=====================  ==========================================================

In ``theorem1`` and ``theorem2`` modes ``grid.m`` and ``taper.gamma`` are
paired elementwise into an ``(n, gamma)`` ladder.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..covmodel import ModelConfig, free_names, params_from_config, preset_model
from ..taper import _canonical

__all__ = [
    "MODES",
    "ConfigError",
    "Scenario",
    "list_presets",
    "load_scenario",
    "parse_config",
    "scenario_from_mapping",
]

MODES = ("estimate", "mspe_curve", "predict", "theorem1", "theorem2")


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


def parse_config(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _floats(key, value) -> tuple[float, ...]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    try:
        return tuple(float(v) for v in items)
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {value!r}") from None


def _ints(key, value) -> tuple[int, ...]:
    vals = _floats(key, value)
    if any(not np.isfinite(v) or v != int(v) for v in vals):
        raise ConfigError(f"{key}: expected integers, got {value!r}")
    return tuple(int(v) for v in vals)


def _bool(key, value) -> bool:
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    mode: str = "estimate"
    model: str = "A"
    families: tuple = ("i",)
    gammas: tuple = (4.0, 6.0, 8.0, 10.0, np.inf)
    ms: tuple = (10,)
    delta: float = 1.0
    spacing: float = 1.0
    seed: int = 0
    n_rep: int = 100
    workers: int = 1
    max_evals: int = 2000
    xtol: float = 1e-6
    ftol: float = 1e-8
    initial_step: float = 0.1
    gap_grid: str = "star"
    gap_spread: float = 0.2
    n_mc: int = 100
    site: tuple = (0.0, 0.0)
    plugin: bool = False
    target: int = 1
    overrides: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.model.upper() not in ("A", "B"):
            raise ConfigError(f"unknown model preset {self.model!r}")
        if not self.families:
            raise ConfigError("taper.family is empty")
        for fam in self.families:
            try:
                _canonical(fam)
            except Exception:
                raise ConfigError(f"unknown taper family {fam!r}") from None
        if not self.gammas:
            raise ConfigError("taper.gamma is empty")
        if any(not g > 0 for g in self.gammas):
            raise ConfigError("taper ranges must be positive or inf")
        if len(set(self.gammas)) != len(self.gammas):
            raise ConfigError("taper.gamma has repeated values")
        if not self.ms or any(m < 1 for m in self.ms):
            raise ConfigError("grid.m must list positive integers")
        if not 0 < self.delta <= 1:
            raise ConfigError("grid.delta must lie in (0, 1]")
        if not self.spacing > 0:
            raise ConfigError("grid.spacing must be positive")
        if self.n_rep < 1 or self.workers < 1 or self.max_evals < 1:
            raise ConfigError("n_rep, workers and fit.max_evals must be positive")
        if self.gap_grid not in ("star", "lattice"):
            raise ConfigError("gap.grid must be star or lattice")
        if self.n_mc < 2:
            raise ConfigError("mc.n_sites must be at least 2")
        if len(self.site) != 2:
            raise ConfigError("predict.site needs two coordinates")
        if self.target not in (1, 2):
            raise ConfigError("predict.target must be 1 or 2")
        if self.mode in ("theorem1", "theorem2"):
            if len(self.ms) != len(self.gammas):
                raise ConfigError("theorem modes pair grid.m with taper.gamma; lengths differ")
            if any(np.isinf(g) for g in self.gammas):
                raise ConfigError("theorem ladders need finite taper ranges")
        names = set(free_names(2)) | {"nu.11", "nu.12", "nu.22"}
        for key, _ in self.overrides:
            if key not in names:
                raise ConfigError(f"unknown parameter override param.{key}")

    def model_config(self) -> ModelConfig:
        cfg = preset_model(self.model)
        if not self.overrides:
            return cfg
        try:
            params = params_from_config(dict(self.overrides), cfg.params_true)
            return ModelConfig(cfg.name, params, cfg.box, cfg.d)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def with_updates(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def to_text(self) -> str:
        """Canonical config text; reparsing gives an equal scenario."""
        def fmt(v):
            return repr(float(v))

        lines = [
            f"name = {self.name}",
            f"mode = {self.mode}",
            f"model = {self.model}",
            f"taper.family = {', '.join(self.families)}",
            f"taper.gamma = {', '.join(fmt(g) for g in self.gammas)}",
            f"grid.m = {', '.join(str(m) for m in self.ms)}",
            f"grid.delta = {fmt(self.delta)}",
            f"grid.spacing = {fmt(self.spacing)}",
            f"seed = {self.seed}",
            f"n_rep = {self.n_rep}",
            f"fit.max_evals = {self.max_evals}",
            f"fit.xtol = {fmt(self.xtol)}",
            f"fit.ftol = {fmt(self.ftol)}",
            f"fit.initial_step = {fmt(self.initial_step)}",
            f"gap.grid = {self.gap_grid}",
            f"gap.spread = {fmt(self.gap_spread)}",
            f"mc.n_sites = {self.n_mc}",
            f"predict.site = {fmt(self.site[0])}, {fmt(self.site[1])}",
            f"predict.plugin = {str(self.plugin).lower()}",
            f"predict.target = {self.target}",
        ]
        lines += [f"param.{k} = {fmt(v)}" for k, v in self.overrides]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        """SHA-256 of :meth:`to_text`; ``workers`` is excluded since it does not change results."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()


_KEYS = {
    "name": ("name", str),
    "mode": ("mode", str),
    "model": ("model", str),
    "taper.family": ("families", lambda k, v: tuple(s.strip() for s in v.split(",") if s.strip())),
    "taper.gamma": ("gammas", _floats),
    "grid.m": ("ms", _ints),
    "grid.delta": ("delta", lambda k, v: _single(_floats(k, v), k)),
    "grid.spacing": ("spacing", lambda k, v: _single(_floats(k, v), k)),
    "seed": ("seed", lambda k, v: _single(_ints(k, v), k)),
    "n_rep": ("n_rep", lambda k, v: _single(_ints(k, v), k)),
    "workers": ("workers", lambda k, v: _single(_ints(k, v), k)),
    "fit.max_evals": ("max_evals", lambda k, v: _single(_ints(k, v), k)),
    "fit.xtol": ("xtol", lambda k, v: _single(_floats(k, v), k)),
    "fit.ftol": ("ftol", lambda k, v: _single(_floats(k, v), k)),
    "fit.initial_step": ("initial_step", lambda k, v: _single(_floats(k, v), k)),
    "gap.grid": ("gap_grid", str),
    "gap.spread": ("gap_spread", lambda k, v: _single(_floats(k, v), k)),
    "mc.n_sites": ("n_mc", lambda k, v: _single(_ints(k, v), k)),
    "predict.site": ("site", _floats),
    "predict.plugin": ("plugin", _bool),
    "predict.target": ("target", lambda k, v: _single(_ints(k, v), k)),
}


def _single(vals, key):
    if len(vals) != 1:
        raise ConfigError(f"{key}: expected a single value")
    return vals[0]


def scenario_from_mapping(entries: dict[str, str], base: Scenario | None = None) -> Scenario:
    """Build a :class:`Scenario` from parsed entries layered over ``base``."""
    kw = {}
    overrides = dict(base.overrides) if base is not None else {}
    for key, value in entries.items():
        if key.startswith("param."):
            overrides[key[len("param."):]] = _single(_floats(key, value), key)
            continue
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        attr, conv = _KEYS[key]
        kw[attr] = value if conv is str else conv(key, value)
    kw["overrides"] = tuple(sorted(overrides.items()))
    try:
        return replace(base, **kw) if base is not None else Scenario(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _preset_dir():
    return resources.files("tapergp.experiments").joinpath("scenarios")


def list_presets() -> list[str]:
    return sorted(p.name[:-4] for p in _preset_dir().iterdir() if p.name.endswith(".cfg"))


def load_scenario(source, base: Scenario | None = None) -> Scenario:
    """Load a scenario from a file path or a shipped preset name.

    Raises
    ------
    ConfigError
        For unknown presets or malformed content.
    OSError
        If ``source`` names a file that cannot be read.
    """
    path = Path(source)
    if path.suffix == ".cfg" or path.exists():
        text = path.read_text()
    else:
        preset = _preset_dir().joinpath(f"{source}.cfg")
        if not preset.is_file():
            raise ConfigError(f"no such config file or preset: {source!r} (presets: {', '.join(list_presets())})")
        text = preset.read_text()
    return scenario_from_mapping(parse_config(text), base)


SCENARIO_FIELDS = tuple(f.name for f in fields(Scenario))
