"""Compactly supported taper matrix functions.

All entries vanish exactly for ``||h|| >= gamma``; that exact zero is what
makes tapered covariance matrices structurally sparse.  ``gamma = inf``
means "no tapering" and every entry is identically one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import ParameterError

__all__ = [
    "FAMILIES",
    "TaperSpec",
    "make_taper",
    "support_radius",
    "taper_value",
    "validate_condition4",
]


def wendland1(r):
    r = np.asarray(r, dtype=float)
    s = np.clip(1.0 - r, 0.0, None)
    return s**4 * (1.0 + 4.0 * r)


def wendland2(r):
    r = np.asarray(r, dtype=float)
    s = np.clip(1.0 - r, 0.0, None)
    return s**6 * (1.0 + 6.0 * r + 35.0 * r * r / 3.0)


def spherical(r):
    r = np.asarray(r, dtype=float)
    s = np.clip(1.0 - r, 0.0, None)
    return s**2 * (1.0 + 0.5 * r)


_SQRT_6_7 = np.sqrt(6.0 / 7.0)


def _biv_11(r):
    r = np.asarray(r, dtype=float)
    return np.clip(1.0 - r, 0.0, None) ** 5 * (1.0 + 5.0 * r + r * r)


def _biv_12(r):
    return _SQRT_6_7 * _biv_11(r)


def _biv_22(r):
    r = np.asarray(r, dtype=float)
    return np.clip(1.0 - r, 0.0, None) ** 5 * (1.0 + 5.0 * r)


# canonical family name -> accepted aliases
FAMILIES = {
    "wendland1": ("i", "w1"),
    "wendland2": ("ii", "w2"),
    "spherical": ("iii", "sph"),
    "multivariate_iv": ("iv", "biv"),
}

_UNIVARIATE = {"wendland1": wendland1, "wendland2": wendland2, "spherical": spherical}


def _canonical(family: str) -> str:
    fam = str(family).strip().lower()
    for name, aliases in FAMILIES.items():
        if fam == name or fam in aliases:
            return name
    if fam == "custom":
        return "custom"
    raise ParameterError(f"unknown taper family {family!r}")


@dataclass(frozen=True, eq=False)
class TaperSpec:
    """A ``p x p`` table of radial taper functions and a taper range.

    Each table entry maps the scaled distance ``r = ||h|| / gamma`` to
    ``[-1, 1]`` and must vanish for ``r >= 1``.
    """

    family: str
    gamma: float
    p: int = 2
    table: tuple = field(default=None, repr=False)

    def __post_init__(self):
        fam = _canonical(self.family)
        object.__setattr__(self, "family", fam)
        gamma = float(self.gamma)
        if not gamma > 0:
            raise ParameterError(f"taper range must be positive, got {self.gamma!r}")
        object.__setattr__(self, "gamma", gamma)
        if fam == "custom":
            if self.table is None:
                raise ParameterError("custom taper needs a table of functions")
            table = tuple(tuple(row) for row in self.table)
            if len(table) != self.p or any(len(row) != self.p for row in table):
                raise ParameterError("custom taper table must be p x p")
        elif fam == "multivariate_iv":
            if self.p != 2:
                raise ParameterError("taper family (iv) is bivariate only")
            table = ((_biv_11, _biv_12), (_biv_12, _biv_22))
        else:
            f = _UNIVARIATE[fam]
            table = tuple(tuple(f for _ in range(self.p)) for _ in range(self.p))
        object.__setattr__(self, "table", table)

    @property
    def is_inf(self) -> bool:
        return np.isinf(self.gamma)

    @property
    def violates_condition4(self) -> bool:
        return not validate_condition4(self)[0]

    def radial(self, k: int, l: int) -> Callable:
        return self.table[k][l]

    def block(self, dist, k: int, l: int) -> np.ndarray:
        """Entry ``t_kl`` on an array of Euclidean distances (unscaled)."""
        dist = np.asarray(dist, dtype=float)
        if self.is_inf:
            return np.ones_like(dist)
        r = dist / self.gamma
        out = np.asarray(self.table[k][l](r), dtype=float)
        # compact support is exact, not approximate
        return np.where(r >= 1.0, 0.0, out)

    def with_gamma(self, gamma: float) -> "TaperSpec":
        return TaperSpec(self.family, gamma, self.p, self.table if self.family == "custom" else None)


def make_taper(family: str, gamma, p: int = 2) -> TaperSpec:
    if isinstance(gamma, str):
        gamma = float(gamma.strip().lower().replace("infinity", "inf"))
    return TaperSpec(family, gamma, p)


def taper_value(h, k: int, l: int, spec: TaperSpec):
    """Evaluate ``t_kl(h / gamma)`` for a lag vector (or stack of lags)."""
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise ParameterError("lag must be finite")
    dist = np.sqrt((h * h).sum(axis=-1)) if h.ndim >= 1 else np.abs(h)
    val = spec.block(dist, k, l)
    return float(val) if np.ndim(val) == 0 else val


def support_radius(spec: TaperSpec) -> float:
    return spec.gamma


def validate_condition4(spec: TaperSpec, n_probe: int = 2001) -> tuple[bool, list[tuple[int, int]]]:
    """Check ``t_kl(0) = 1`` and ``|t_kl| <= 1`` for every entry.

    The bound is probed on a deterministic grid of scaled distances in
    ``[0, 1.5]``.  Returns ``(holds, offending)`` with one-based index pairs.
    """
    if spec.is_inf:
        return True, []
    r = np.linspace(0.0, 1.5, n_probe)
    offending = []
    for k in range(spec.p):
        for l in range(spec.p):
            f = spec.table[k][l]
            at0 = float(np.asarray(f(np.zeros(1)))[0])
            vals = np.asarray(f(r), dtype=float)
            if abs(at0 - 1.0) > 1e-12 or np.any(np.abs(vals) > 1.0 + 1e-12):
                offending.append((k + 1, l + 1))
    return not offending, offending
