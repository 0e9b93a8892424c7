"""Assembly of tapered covariance matrices in sparse and dense form.

Rows and columns follow the stacking ``i = k * n + a`` (component ``k``,
site ``a``, both zero-based).  Sparse matrices keep only the lower
triangle, in compressed-column form.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from ..covmodel import DEFAULT_DENSE_CAP, MultiMaternParams, SizeError, cross_covariance_matrix
from ..geometry import LocationSet, ParameterError, pairs_within
from ..taper import TaperSpec

__all__ = [
    "DEFAULT_NNZ_CAP",
    "DenseLayout",
    "SparsePattern",
    "SparseSymMatrix",
    "TaperedLayout",
    "assemble_dense",
    "assemble_tapered",
    "export_matrix_market",
    "spectral_bound",
]

DEFAULT_NNZ_CAP = 50_000_000


class SparsePattern:
    """Lower-triangular CSC structure shared by every matrix on one layout.

    Symbolic analyses are cached here per ordering.
    """

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self._analyses = {}

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def analysis(self, ordering: str = "amd"):
        if ordering not in self._analyses:
            from .cholesky import analyze

            self._analyses[ordering] = analyze(self, ordering)
        return self._analyses[ordering]


class SparseSymMatrix:
    """Symmetric matrix stored as its lower triangle.

    Attributes
    ----------
    pattern : SparsePattern
        Shared structure (with cached orderings).
    data : ndarray
        Values aligned with ``pattern.indices``.
    n_sites, p : int
        Block layout; the order is ``n_sites * p``.
    """

    def __init__(self, pattern: SparsePattern, data: np.ndarray, n_sites: int | None = None, p: int = 1):
        self.pattern = pattern
        self.data = np.asarray(data, dtype=float)
        self.p = int(p)
        self.n_sites = int(n_sites) if n_sites is not None else pattern.n // self.p
        if self.data.shape != (pattern.nnz,):
            raise ValueError("data does not match the pattern")

    @property
    def order(self) -> int:
        return self.pattern.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.order, self.order)

    @property
    def nnz_lower(self) -> int:
        return self.pattern.nnz

    def block_index(self, k: int, a: int) -> int:
        return k * self.n_sites + a

    def lower(self):
        from scipy.sparse import csc_matrix

        return csc_matrix((self.data, self.pattern.indices, self.pattern.indptr), shape=self.shape)

    def to_scipy(self):
        """Full symmetric matrix as ``scipy.sparse.csr_matrix``."""
        from scipy.sparse import diags

        low = self.lower()
        return (low + low.T - diags(low.diagonal())).tocsr()

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def diagonal(self) -> np.ndarray:
        return self.lower().diagonal()

    def matvec(self, v) -> np.ndarray:
        return self.to_scipy() @ np.asarray(v, dtype=float)

    @classmethod
    def from_dense(cls, a, p: int = 1, drop_zeros: bool = True) -> "SparseSymMatrix":
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        low = np.tril(a)
        mask = low != 0 if drop_zeros else np.tril(np.ones_like(a, dtype=bool))
        mask[np.diag_indices(n)] = True
        rows, cols = np.nonzero(mask.T)  # column-major scan
        rows, cols = cols, rows
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(cols, minlength=n), out=indptr[1:])
        return cls(SparsePattern(n, indptr, rows), low[rows, cols], p=p)


class TaperedLayout:
    """Sparsity pattern and distance bookkeeping for one (sites, taper range).

    Building the layout finds the neighbour pairs once; :meth:`assemble`
    then only evaluates covariance and taper values.  The structure is
    determined by the taper support alone, so an exactly-zero covariance
    value inside the support is still stored.
    """

    def __init__(self, locs: LocationSet, gamma: float, p: int, nnz_cap: int = DEFAULT_NNZ_CAP):
        if np.isinf(gamma):
            raise ParameterError("taper range is infinite; use the dense path")
        if not gamma > 0:
            raise ParameterError("taper range must be positive")
        self.locs = locs
        self.gamma = float(gamma)
        self.p = int(p)
        n = locs.n
        hi, lo, dist = pairs_within(locs, self.gamma)
        npair = hi.size
        est = p * n + (p * (p + 1) // 2) * npair + (p * (p - 1) // 2) * npair
        if est > nnz_cap:
            raise SizeError(f"tapered matrix would hold {est} lower-triangle nonzeros (cap {nnz_cap})")
        self.n_pairs = int(npair)
        self.base_dist = np.concatenate([np.zeros(n), dist])

        site = np.arange(n, dtype=np.int64)
        rows, cols, self._blocks = [], [], []
        offset = 0
        for k in range(p):
            for l in range(k + 1):
                r = [k * n + site, k * n + hi]
                c = [l * n + site, l * n + lo]
                if k != l:
                    r.append(k * n + lo)
                    c.append(l * n + hi)
                r = np.concatenate(r)
                rows.append(r)
                cols.append(np.concatenate(c))
                self._blocks.append((k, l, offset, offset + r.size))
                offset += r.size
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        N = n * p
        self._order = np.lexsort((rows, cols))
        indptr = np.zeros(N + 1, dtype=np.int64)
        np.cumsum(np.bincount(cols, minlength=N), out=indptr[1:])
        self.pattern = SparsePattern(N, indptr, rows[self._order])

    def values(self, params: MultiMaternParams, spec: TaperSpec) -> np.ndarray:
        """Entry values in pattern order."""
        if params.p != self.p or spec.p != self.p:
            raise ParameterError("component count mismatch")
        if spec.gamma != self.gamma:
            raise ParameterError("taper range differs from the layout's")
        n = self.locs.n
        vals = np.empty(self._blocks[-1][3])
        for k, l, start, stop in self._blocks:
            v = cross_covariance_matrix(self.base_dist, params, k, l) * spec.block(self.base_dist, k, l)
            if k != l:
                v = np.concatenate([v, v[n:]])
            vals[start:stop] = v
        return vals[self._order]

    def assemble(self, params: MultiMaternParams, spec: TaperSpec) -> SparseSymMatrix:
        return SparseSymMatrix(self.pattern, self.values(params, spec), self.locs.n, self.p)


def assemble_tapered(params: MultiMaternParams, locs: LocationSet, spec: TaperSpec,
                     nnz_cap: int = DEFAULT_NNZ_CAP) -> SparseSymMatrix:
    """``K = Sigma o T`` in sparse form; pairs at distance ``>= gamma`` are absent."""
    return TaperedLayout(locs, spec.gamma, params.p, nnz_cap).assemble(params, spec)


class DenseLayout:
    """Pairwise distances of a site set, cached for repeated dense assembly."""

    def __init__(self, locs: LocationSet, dense_cap: int = DEFAULT_DENSE_CAP, p: int = 1):
        if locs.n * p > dense_cap:
            raise SizeError(f"dense order {locs.n * p} exceeds the cap {dense_cap}")
        self.locs = locs
        self.dist = cdist(locs.points, locs.points)

    def assemble(self, params: MultiMaternParams, spec: TaperSpec | None = None) -> np.ndarray:
        n = self.locs.n
        p = params.p
        out = np.empty((n * p, n * p))
        for k in range(p):
            for l in range(k, p):
                blk = cross_covariance_matrix(self.dist, params, k, l)
                if spec is not None and not spec.is_inf:
                    blk = blk * spec.block(self.dist, k, l)
                out[k * n:(k + 1) * n, l * n:(l + 1) * n] = blk
                if k != l:
                    out[l * n:(l + 1) * n, k * n:(k + 1) * n] = blk.T
        return out


def assemble_dense(params: MultiMaternParams, locs: LocationSet, spec: TaperSpec | None = None,
                   dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Dense ``Sigma`` (or ``Sigma o T`` when ``spec`` is given)."""
    return DenseLayout(locs, dense_cap, params.p).assemble(params, spec)


def spectral_bound(matrix) -> float:
    """Gershgorin bound ``max_i sum_j |a_ij|`` on the largest eigenvalue."""
    if isinstance(matrix, SparseSymMatrix):
        low = abs(matrix.lower())
        rows = np.asarray(low.sum(axis=1)).ravel()
        cols = np.asarray(low.sum(axis=0)).ravel()
        return float((rows + cols - low.diagonal()).max())
    a = np.asarray(matrix, dtype=float)
    return float(np.abs(a).sum(axis=1).max())


def export_matrix_market(matrix: SparseSymMatrix, target) -> None:
    """Write the lower triangle in MatrixMarket symmetric coordinate format."""
    from scipy.io import mmwrite

    mmwrite(target, matrix.lower().tocoo(), symmetry="symmetric")
