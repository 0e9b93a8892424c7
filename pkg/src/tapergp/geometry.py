"""Observation and prediction location sets.

Locations are stored as an ``(n, d)`` float array.  Two norms are in play:
the Euclidean norm drives covariance and taper arguments, while the max-norm
is used for the minimum-separation guarantee of the sampling design.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "GridDesign",
    "LocationSet",
    "ParameterError",
    "grid_centers",
    "min_pairwise_distance",
    "neighbors_within",
    "pairs_within",
    "read_locations_csv",
    "sample_perturbed_grid",
    "write_locations_csv",
]


class ParameterError(ValueError):
    """Raised for invalid numerical parameters or malformed inputs."""


@dataclass(frozen=True, eq=False)
class LocationSet:
    """An immutable set of ``n`` distinct sites in ``R^d``.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Site coordinates.
    min_sep : float, optional
        Guaranteed minimum max-norm separation between distinct sites.
        Zero means no guarantee is recorded.
    validate : bool
        When true, check distinctness and the separation guarantee.
    """

    points: np.ndarray
    min_sep: float = 0.0
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ParameterError("points must be a non-empty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("points must be finite")
        if self.min_sep < 0:
            raise ParameterError("min_sep must be nonnegative")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.validate and pts.shape[0] > 1:
            dmin = min_pairwise_distance(self, norm="max")
            if dmin <= 0:
                raise ParameterError("locations must be pairwise distinct")
            # small slack for floating point round-off in the sampler
            if self.min_sep > 0 and dmin < self.min_sep * (1 - 1e-12):
                raise ParameterError(
                    f"minimum max-norm separation {dmin} is below min_sep={self.min_sep}"
                )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class GridDesign:
    """Perturbed-grid design with ``4 m^2`` sites in the plane.

    Each site is drawn uniformly in an axis-aligned square of side
    ``(1 - delta) * spacing`` centred at ``(±(r - 1/2), ±(s - 1/2)) * spacing``,
    ``r, s = 1..m``.  Neighbouring squares are therefore at least
    ``delta * spacing`` apart in the max-norm; ``delta = 1`` is the regular grid.
    """

    m: int
    delta: float = 1.0
    spacing: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ParameterError(f"m must be a positive integer, got {self.m!r}")
        if not (0.0 < self.delta <= 1.0):
            raise ParameterError(f"delta must lie in (0, 1], got {self.delta!r}")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ParameterError(f"spacing must be positive, got {self.spacing!r}")

    @property
    def n(self) -> int:
        return 4 * self.m * self.m

    @property
    def half_width(self) -> float:
        """Half side length of the square domain covered by the cells."""
        return self.m * self.spacing


def grid_centers(m: int, spacing: float = 1.0) -> np.ndarray:
    """Return the ``4 m^2`` cell centres, x-major then y."""
    half = (np.arange(1, m + 1) - 0.5) * spacing
    axis = np.concatenate([-half[::-1], half])
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def sample_perturbed_grid(design: GridDesign, seed=None) -> LocationSet:
    """Draw one location set from ``design``.

    With ``delta == 1`` the result is the deterministic grid of centres and
    ``seed`` is ignored.
    """
    centers = grid_centers(design.m, design.spacing)
    if design.delta == 1.0:
        pts = centers
    else:
        rng = np.random.default_rng(seed)
        side = (1.0 - design.delta) * design.spacing
        pts = centers + rng.uniform(-0.5, 0.5, size=centers.shape) * side
    return LocationSet(pts, min_sep=design.delta * design.spacing)


def _as_points(locs) -> np.ndarray:
    if isinstance(locs, LocationSet):
        return locs.points
    pts = np.asarray(locs, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def min_pairwise_distance(locs, norm: str = "max") -> float:
    """Exact minimum distance over all pairs of sites."""
    pts = _as_points(locs)
    if pts.shape[0] < 2:
        raise ParameterError("need at least two sites")
    if norm == "max":
        pnorm = np.inf
    elif norm == "euclidean":
        pnorm = 2
    else:
        raise ParameterError(f"unknown norm {norm!r}")
    dist, _ = cKDTree(pts).query(pts, k=2, p=pnorm)
    return float(dist[:, 1].min())


def neighbors_within(locs, center, radius: float) -> tuple[int, np.ndarray]:
    """Indices of sites strictly within Euclidean ``radius`` of ``center``.

    ``radius = inf`` returns every index.
    """
    pts = _as_points(locs)
    center = np.asarray(center, dtype=float).ravel()
    if center.shape[0] != pts.shape[1]:
        raise ParameterError("center dimension does not match locations")
    if not radius > 0:
        raise ParameterError("radius must be positive")
    if np.isinf(radius):
        idx = np.arange(pts.shape[0])
    else:
        d = np.sqrt(((pts - center) ** 2).sum(axis=1))
        idx = np.flatnonzero(d < radius)
    return int(idx.size), idx


def pairs_within(locs, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All ordered pairs ``a > b`` with Euclidean distance ``< radius``.

    Uses a k-d tree, so the cost is proportional to the number of pairs
    rather than ``n^2``.  Returns ``(a, b, dist)`` sorted by ``(b, a)``.
    """
    pts = _as_points(locs)
    tree = cKDTree(pts)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    if pairs.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0)
    hi = pairs.max(axis=1).astype(np.int64)
    lo = pairs.min(axis=1).astype(np.int64)
    dist = np.sqrt(((pts[hi] - pts[lo]) ** 2).sum(axis=1))
    keep = dist < radius
    hi, lo, dist = hi[keep], lo[keep], dist[keep]
    order = np.lexsort((hi, lo))
    return hi[order], lo[order], dist[order]


def write_locations_csv(locs: LocationSet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(locs.dim)])
        for row in locs.points:
            writer.writerow([repr(float(v)) for v in row])


def read_locations_csv(path, min_sep: float = 0.0) -> LocationSet:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != [f"x{i + 1}" for i in range(len(header))]:
            raise ParameterError(f"unexpected location header {header!r}")
        rows = [[float(v) for v in row] for row in reader if row]
    return LocationSet(np.array(rows), min_sep=min_sep)
