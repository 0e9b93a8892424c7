"""Multivariate Matérn direct and cross covariances.

The ``(k, l)`` entry of the matrix covariance is

.. math::

    c_{kl}(h) = \\sigma_{kl}^2 \\frac{2^{1-\\nu_{kl}}}{\\Gamma(\\nu_{kl})}
        (\\|h\\|/\\rho_{kl})^{\\nu_{kl}} K_{\\nu_{kl}}(\\|h\\|/\\rho_{kl}),

so ``c_kl(0) = sigma_kl**2``.  Smoothness parameters are never estimated;
the free parameter vector holds the ranges followed by the sills, each in
upper-triangular order ``(11, 12, ..., 1p, 22, ..., pp)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, kv

from .geometry import LocationSet, ParameterError

__all__ = [
    "DEFAULT_DENSE_CAP",
    "ModelConfig",
    "MultiMaternParams",
    "ParamBox",
    "SizeError",
    "check_validity",
    "cross_covariance_matrix",
    "default_box",
    "matern_correlation",
    "matern_cov",
    "pack",
    "params_from_config",
    "params_to_config",
    "preset_model",
    "unpack",
]

DEFAULT_DENSE_CAP = 6000


class SizeError(RuntimeError):
    """Raised when a dense computation would exceed the configured cap."""


def _triu_pairs(p: int) -> list[tuple[int, int]]:
    return [(k, l) for k in range(p) for l in range(k, p)]


def _sym(a, p: int, name: str) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.shape == (p * (p + 1) // 2,):
        out = np.empty((p, p))
        for v, (k, l) in zip(a, _triu_pairs(p)):
            out[k, l] = out[l, k] = v
        a = out
    if a.shape != (p, p):
        raise ParameterError(f"{name} must be {p}x{p} or a length-{p * (p + 1) // 2} triangle")
    if not np.allclose(a, a.T, rtol=0, atol=0):
        raise ParameterError(f"{name} must be symmetric")
    return a


@dataclass(frozen=True, eq=False)
class MultiMaternParams:
    """Ranges, sills and smoothness of a ``p``-variate Matérn model.

    Each of ``rho``, ``sill``, ``nu`` may be given as a symmetric ``p x p``
    matrix or as its upper triangle in ``(11, 12, 22)`` order.
    """

    rho: np.ndarray
    sill: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        p = rho.shape[0] if rho.ndim == 2 else int(round((np.sqrt(8 * rho.size + 1) - 1) / 2))
        for name in ("rho", "sill", "nu"):
            arr = _sym(getattr(self, name), p, name)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.all(np.isfinite(self.rho)) or np.any(self.rho <= 0):
            raise ParameterError("ranges must be positive")
        if not np.all(np.isfinite(self.nu)) or np.any(self.nu <= 0):
            raise ParameterError("smoothness parameters must be positive")
        if not np.all(np.isfinite(self.sill)) or np.any(np.diag(self.sill) <= 0):
            raise ParameterError("direct sills must be positive")

    @property
    def p(self) -> int:
        return self.rho.shape[0]

    def zero_lag(self) -> np.ndarray:
        """The ``p x p`` covariance matrix at lag zero."""
        return self.sill**2

    def replace(self, **kw) -> "MultiMaternParams":
        vals = {"rho": self.rho, "sill": self.sill, "nu": self.nu}
        vals.update(kw)
        return MultiMaternParams(**vals)


@dataclass(frozen=True)
class ParamBox:
    """Box constraints ``lower <= theta <= upper`` on the free parameters."""

    free_names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        names = tuple(self.free_names)
        if len(names) < 1 or lo.shape != (len(names),) or hi.shape != (len(names),):
            raise ParameterError("box bounds must match the free parameter names")
        if np.any(lo >= hi):
            raise ParameterError("box requires lower < upper componentwise")
        object.__setattr__(self, "free_names", names)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def q(self) -> int:
        return len(self.free_names)

    def contains(self, theta, strict: bool = False) -> bool:
        theta = np.asarray(theta, dtype=float)
        if strict:
            return bool(np.all(theta > self.lower) and np.all(theta < self.upper))
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def project(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)


def free_names(p: int) -> tuple[str, ...]:
    tri = [f"{k + 1}{l + 1}" for k, l in _triu_pairs(p)]
    return tuple([f"rho.{s}" for s in tri] + [f"sigma.{s}" for s in tri])


def default_box(p: int) -> ParamBox:
    """Ranges in [0.1, 50], direct sills in [0.01, 10], cross sills in [-5, 5]."""
    lo, hi = [], []
    pairs = _triu_pairs(p)
    for _ in pairs:
        lo.append(0.1)
        hi.append(50.0)
    for k, l in pairs:
        lo.append(0.01 if k == l else -5.0)
        hi.append(10.0 if k == l else 5.0)
    return ParamBox(free_names(p), np.array(lo), np.array(hi))


@dataclass(frozen=True)
class ModelConfig:
    """True parameters together with the estimation box."""

    name: str
    params_true: MultiMaternParams
    box: ParamBox
    d: int = 2

    def __post_init__(self):
        theta0 = pack(self.params_true)
        if not self.box.contains(theta0, strict=True):
            raise ParameterError("true parameters must lie strictly inside the box")

    @property
    def p(self) -> int:
        return self.params_true.p

    @property
    def theta0(self) -> np.ndarray:
        return pack(self.params_true)


_PRESETS = {
    "A": dict(rho=[5.0, 3.0, 4.0], sill=[1.0, 0.6, 1.0], nu=[0.5, 0.5, 0.5]),
    "B": dict(rho=[3.0, 3.0, 4.0], sill=[1.0, 0.7, 1.0], nu=[1.5, 1.0, 0.5]),
}


def preset_model(name: str) -> ModelConfig:
    """Bivariate models ``"A"`` (exponential) and ``"B"`` (mixed smoothness)."""
    key = str(name).upper()
    if key not in _PRESETS:
        raise ParameterError(f"unknown model preset {name!r}; expected one of {sorted(_PRESETS)}")
    params = MultiMaternParams(**_PRESETS[key])
    return ModelConfig(key, params, default_box(2))


def pack(params: MultiMaternParams) -> np.ndarray:
    pairs = _triu_pairs(params.p)
    return np.array([params.rho[k, l] for k, l in pairs] + [params.sill[k, l] for k, l in pairs])


def unpack(theta, template: MultiMaternParams, box: ParamBox | None = None,
           strict: bool = False) -> MultiMaternParams:
    """Inverse of :func:`pack`, taking ``nu`` from ``template``.

    With ``strict=True`` a value outside ``box`` raises ``ParameterError``.
    """
    p = template.p
    pairs = _triu_pairs(p)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (2 * len(pairs),):
        raise ParameterError(f"theta must have length {2 * len(pairs)}")
    if strict:
        if box is None:
            raise ParameterError("strict unpacking needs a box")
        if not box.contains(theta):
            raise ParameterError(f"theta {theta} lies outside the parameter box")
    m = len(pairs)
    return MultiMaternParams(rho=theta[:m], sill=theta[m:], nu=template.nu)


def matern_correlation(dist, rho: float, nu: float) -> np.ndarray:
    """Matérn correlation ``2^{1-nu}/Gamma(nu) r^nu K_nu(r)`` at ``r = dist/rho``.

    Half-integer smoothness up to 5/2 uses the closed forms; other values go
    through ``scipy.special.kv``.
    """
    r = np.asarray(dist, dtype=float) / rho
    if nu == 0.5:
        return np.exp(-r)
    if nu == 1.5:
        return (1.0 + r) * np.exp(-r)
    if nu == 2.5:
        return (1.0 + r + r * r / 3.0) * np.exp(-r)
    out = np.ones_like(r)
    pos = r > 0
    rp = r[pos]
    # log-scale prefactor avoids overflow of r^nu for large nu
    logc = (1.0 - nu) * np.log(2.0) - gammaln(nu) + nu * np.log(rp)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.exp(logc) * kv(nu, rp)
    vals[~np.isfinite(vals)] = 0.0
    out[pos] = vals
    return out


def matern_cov(h, k: int, l: int, params: MultiMaternParams) -> float | np.ndarray:
    """Covariance ``c_kl(h)`` for a lag vector ``h`` (or a stack of lags).

    ``k`` and ``l`` are zero-based component indices.
    """
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise ParameterError("lag must be finite")
    dist = np.sqrt((h * h).sum(axis=-1)) if h.ndim >= 1 else np.abs(h)
    val = params.sill[k, l] ** 2 * matern_correlation(dist, params.rho[k, l], params.nu[k, l])
    return float(val) if np.ndim(val) == 0 else val


def cross_covariance_matrix(dist: np.ndarray, params: MultiMaternParams, k: int, l: int) -> np.ndarray:
    """Block ``c_kl`` evaluated on a matrix (or vector) of Euclidean distances."""
    return params.sill[k, l] ** 2 * matern_correlation(dist, params.rho[k, l], params.nu[k, l])


def check_validity(params: MultiMaternParams, locs: LocationSet, tol: float = 0.0,
                   dense_cap: int = DEFAULT_DENSE_CAP) -> tuple[bool, float]:
    """Smallest eigenvalue of the dense covariance matrix on ``locs``.

    Returns ``(valid, min_eigenvalue)`` with ``valid = min_eigenvalue >= tol``.
    """
    from .sparse import assemble_dense

    if locs.n * params.p > dense_cap:
        raise SizeError(f"np = {locs.n * params.p} exceeds the dense cap {dense_cap}; subsample")
    sigma = assemble_dense(params, locs, dense_cap=dense_cap)
    lam = float(np.linalg.eigvalsh(sigma)[0])
    return lam >= tol, lam


def params_to_config(params: MultiMaternParams) -> dict[str, float]:
    """Flat ``rho.11`` / ``sigma.12`` / ``nu.22`` key-value representation."""
    out = {}
    for name, arr in (("rho", params.rho), ("sigma", params.sill), ("nu", params.nu)):
        for k, l in _triu_pairs(params.p):
            out[f"{name}.{k + 1}{l + 1}"] = float(arr[k, l])
    return out


def params_from_config(entries: dict, base: MultiMaternParams | None = None) -> MultiMaternParams:
    """Build parameters from flat keys, overriding ``base`` where given."""
    p = base.p if base is not None else None
    if p is None:
        idx = [key.split(".", 1)[1] for key in entries if key.split(".", 1)[0] in ("rho", "sigma", "nu")]
        p = max(int(s[1]) for s in idx) if idx else 0
    if p < 1:
        raise ParameterError("cannot infer the number of components")
    arrays = {}
    for name, attr in (("rho", "rho"), ("sigma", "sill"), ("nu", "nu")):
        arr = np.array(getattr(base, attr)) if base is not None else np.full((p, p), np.nan)
        for k, l in _triu_pairs(p):
            key = f"{name}.{k + 1}{l + 1}"
            if key in entries:
                arr[k, l] = arr[l, k] = float(entries[key])
        if np.any(np.isnan(arr)):
            raise ParameterError(f"missing {name} entries")
        arrays[attr] = arr
    return MultiMaternParams(**arrays)
