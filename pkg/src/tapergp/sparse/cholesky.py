"""Fill-reducing ordering and sparse Cholesky factorization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas, lapack

from . import _kernels

__all__ = [
    "CholeskyFactor",
    "NotPositiveDefinite",
    "SymbolicAnalysis",
    "analyze",
    "factorize",
    "solve",
]


class NotPositiveDefinite(np.linalg.LinAlgError):
    """A nonpositive pivot was met during numeric factorization.

    Attributes
    ----------
    column : int
        Pivot position in the permuted ordering.
    original_column : int
        The corresponding row/column of the unpermuted matrix.
    """

    def __init__(self, column: int, original_column: int):
        self.column = int(column)
        self.original_column = int(original_column)
        super().__init__(
            f"matrix is not positive definite (pivot {self.column}, original index {self.original_column})"
        )


@dataclass(frozen=True, eq=False)
class SymbolicAnalysis:
    """Everything about a factorization that depends only on the pattern."""

    n: int
    perm: np.ndarray        # perm[k] = original index of pivot k
    pinv: np.ndarray
    Up: np.ndarray          # permuted matrix, upper triangle, CSC
    Ui: np.ndarray
    value_map: np.ndarray   # position in lower-CSC data -> position in Ux
    parent: np.ndarray
    Lp: np.ndarray
    ordering: str
    k0: int                 # columns k0: form a dense trailing block
    wcol: np.ndarray        # leading column -> compact index in the Schur update
    nw: int

    @property
    def lnz(self) -> int:
        return int(self.Lp[-1])

    @property
    def flops(self) -> int:
        counts = np.diff(self.Lp)
        return int((counts.astype(np.float64) ** 2).sum())


def _symmetric_offdiag(n, indptr, indices):
    """Full symmetric structure (no diagonal) from a lower CSC pattern."""
    cols = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    rows = indices.astype(np.int64)
    off = rows != cols
    r = np.concatenate([rows[off], cols[off]])
    c = np.concatenate([cols[off], rows[off]])
    order = np.lexsort((r, c))
    r, c = r[order], c[order]
    Ap = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(c, minlength=n), out=Ap[1:])
    return Ap, r


DENSE_TRAILING_MIN = 48


def _dense_trailing_start(counts: np.ndarray) -> int:
    """First column of the trailing block in which every column of L is full."""
    n = counts.size
    full = counts == n - np.arange(n)
    k0 = n
    while k0 > 0 and full[k0 - 1]:
        k0 -= 1
    return k0 if n - k0 >= DENSE_TRAILING_MIN else n


def analyze(pattern, ordering: str = "amd") -> SymbolicAnalysis:
    """Ordering, elimination tree and column counts for a lower-CSC pattern.

    When the trailing columns of ``L`` are completely full (the last
    separator becomes a clique) and that block is large enough, it is
    flagged so the numeric phase can hand it to LAPACK.
    """
    n = pattern.n
    indptr = pattern.indptr
    indices = pattern.indices
    if ordering == "amd":
        Ap, Ai = _symmetric_offdiag(n, indptr, indices)
        perm = _kernels.amd_order(n, Ap, Ai)
    elif ordering == "natural":
        perm = np.arange(n, dtype=np.int64)
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    pinv = np.empty(n, dtype=np.int64)
    pinv[perm] = np.arange(n, dtype=np.int64)

    cols = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    rows = indices.astype(np.int64)
    pr, pc = pinv[rows], pinv[cols]
    urow = np.minimum(pr, pc)
    ucol = np.maximum(pr, pc)
    order = np.lexsort((urow, ucol))
    Ui = urow[order]
    Up = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(ucol, minlength=n), out=Up[1:])
    value_map = np.empty_like(order)
    value_map[order] = np.arange(order.size)

    parent = _kernels.etree(n, Up, Ui)
    counts = _kernels.column_counts(n, Up, Ui, parent)
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    k0 = _dense_trailing_start(counts)
    if k0 < n:
        wcol, nw = _kernels.trailing_columns(n, k0, Up, Ui, parent)
    else:
        wcol, nw = np.empty(0, dtype=np.int64), 0
    return SymbolicAnalysis(n, perm, pinv, Up, Ui, value_map, parent, Lp, ordering, int(k0), wcol, int(nw))


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """``P K P' = L L'`` with ``L`` in compressed-column form.

    Immutable once built, so concurrent solves may share it.
    """

    symbolic: SymbolicAnalysis
    Li: np.ndarray
    Lx: np.ndarray

    @property
    def n(self) -> int:
        return self.symbolic.n

    @property
    def permutation(self) -> np.ndarray:
        return self.symbolic.perm

    @property
    def nnz(self) -> int:
        return self.symbolic.lnz

    @property
    def flops_estimate(self) -> int:
        return self.symbolic.flops

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.log(self.Lx[self.symbolic.Lp[:-1]]).sum())

    def to_scipy(self):
        """Lower factor ``L`` as a ``scipy.sparse.csc_matrix``."""
        from scipy.sparse import csc_matrix

        n = self.n
        return csc_matrix((self.Lx, self.Li, self.symbolic.Lp), shape=(n, n))

    def solve(self, rhs) -> np.ndarray:
        return solve(self, rhs)


def factorize(matrix, ordering: str = "amd") -> CholeskyFactor:
    """Numeric Cholesky of a :class:`SparseSymMatrix`.

    The symbolic analysis is cached on the matrix pattern, so repeated
    factorizations with new values only pay for the numeric phase.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive.
    """
    sym = matrix.pattern.analysis(ordering)
    Ux = np.empty(matrix.data.shape[0])
    Ux[sym.value_map] = matrix.data
    Li = np.empty(sym.lnz, dtype=np.int64)
    Lx = np.empty(sym.lnz)
    n, k0 = sym.n, sym.k0
    if k0 == n:
        fail = _kernels.chol_numeric(n, sym.Up, sym.Ui, Ux, sym.parent, sym.Lp, Li, Lx)
    else:
        nt = n - k0
        W = np.zeros((nt, sym.nw))
        S = np.zeros((nt, nt))
        fail = _kernels.chol_numeric_split(n, k0, sym.Up, sym.Ui, Ux, sym.parent, sym.Lp, Li, Lx,
                                           sym.wcol, W, S)
        if fail < 0:
            # Schur complement of the leading block, lower triangle only
            S = blas.dsyrk(-1.0, W, beta=1.0, c=np.asfortranarray(S), lower=1, overwrite_c=1)
            L22, info = lapack.dpotrf(S, lower=1, clean=1, overwrite_a=1)
            if info > 0:
                fail = k0 + info - 1
            elif info < 0:
                raise ValueError(f"dpotrf argument error {info}")
            else:
                _kernels.store_trailing(n, k0, sym.Lp, Li, Lx, L22)
    if fail >= 0:
        raise NotPositiveDefinite(fail, sym.perm[fail])
    return CholeskyFactor(sym, Li, Lx)


def solve(factor: CholeskyFactor, rhs) -> np.ndarray:
    """``K^{-1} rhs`` by permute, forward solve, backward solve, unpermute."""
    b = np.asarray(rhs, dtype=float)
    vec = b.ndim == 1
    if b.shape[0] != factor.n:
        raise ValueError(f"rhs has {b.shape[0]} rows, factor has order {factor.n}")
    B = b.reshape(factor.n, -1)
    sym = factor.symbolic
    X = np.ascontiguousarray(B[sym.perm])
    _kernels.lsolve(sym.n, sym.Lp, factor.Li, factor.Lx, X)
    _kernels.ltsolve(sym.n, sym.Lp, factor.Li, factor.Lx, X)
    out = np.empty_like(X)
    out[sym.perm] = X
    return out[:, 0] if vec else out


def half_solve(factor: CholeskyFactor, rhs) -> np.ndarray:
    """``L^{-1} P rhs``; its squared norm is the quadratic form ``rhs' K^{-1} rhs``."""
    b = np.asarray(rhs, dtype=float)
    B = b.reshape(factor.n, -1)
    X = np.ascontiguousarray(B[factor.symbolic.perm])
    _kernels.lsolve(factor.n, factor.symbolic.Lp, factor.Li, factor.Lx, X)
    return X[:, 0] if b.ndim == 1 else X
