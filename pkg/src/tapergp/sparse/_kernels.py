"""Compiled kernels for the sparse symmetric factorization.

Conventions follow CSparse: compressed-column arrays ``(p, i, x)`` with
zero-based indices.  The ordering kernel works on the structure of
``A + A'`` with the diagonal removed.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _flip(i):
    return -i - 2


@njit(cache=True)
def _wclear(mark, lemax, w, n):
    if mark < 2 or mark + lemax < 0:
        for k in range(n):
            if w[k] != 0:
                w[k] = 1
        mark = 2
    return mark


@njit(cache=True)
def _tdfs(j, k, head, nxt, post, stack):
    top = 0
    stack[0] = j
    while top >= 0:
        p = stack[top]
        i = head[p]
        if i == -1:
            top -= 1
            post[k] = p
            k += 1
        else:
            head[p] = nxt[i]
            top += 1
            stack[top] = i
    return k


@njit(cache=True)
def amd_order(n, Ap, Ai):
    """Approximate minimum degree ordering of a symmetric pattern.

    ``Ap, Ai`` hold the full symmetric structure without the diagonal.
    Returns ``perm`` with ``perm[k]`` the original index eliminated k-th.
    Quotient graph with element absorption, mass elimination, supervariable
    detection and dense-row postponement; ties go to the most recently
    inserted node of a degree list, which is deterministic.
    """
    P = np.empty(n + 1, dtype=np.int64)
    if n == 0:
        return P[:0]
    cnz = Ap[n]
    dense = max(16, int(10 * np.sqrt(n)))
    dense = min(n - 2, dense)
    t = cnz + cnz // 5 + 2 * n
    Ci = np.empty(max(t, 1), dtype=np.int64)
    Ci[:cnz] = Ai[:cnz]
    Cp = np.empty(n + 1, dtype=np.int64)
    Cp[:] = Ap[: n + 1]
    nzmax = Ci.shape[0]

    ln_ = np.zeros(n + 1, dtype=np.int64)
    nv = np.zeros(n + 1, dtype=np.int64)
    nxt = np.zeros(n + 1, dtype=np.int64)
    head = np.zeros(n + 1, dtype=np.int64)
    elen = np.zeros(n + 1, dtype=np.int64)
    degree = np.zeros(n + 1, dtype=np.int64)
    w = np.zeros(n + 1, dtype=np.int64)
    hhead = np.zeros(n + 1, dtype=np.int64)
    last = P

    for k in range(n):
        ln_[k] = Cp[k + 1] - Cp[k]
    ln_[n] = 0
    for i in range(n + 1):
        head[i] = -1
        last[i] = -1
        nxt[i] = -1
        hhead[i] = -1
        nv[i] = 1
        w[i] = 1
        elen[i] = 0
        degree[i] = ln_[i]
    mark = _wclear(0, 0, w, n)
    elen[n] = -2
    Cp[n] = -1
    w[n] = 0
    nel = 0
    mindeg = 0
    lemax = 0

    for i in range(n):
        d = degree[i]
        if d == 0:
            elen[i] = -2
            nel += 1
            Cp[i] = -1
            w[i] = 0
        elif d > dense:
            nv[i] = 0
            elen[i] = -1
            nel += 1
            Cp[i] = _flip(n)
            nv[n] += 1
        else:
            if head[d] != -1:
                last[head[d]] = i
            nxt[i] = head[d]
            head[d] = i

    while nel < n:
        # select node of minimum approximate degree
        k = -1
        while mindeg < n:
            k = head[mindeg]
            if k != -1:
                break
            mindeg += 1
        if nxt[k] != -1:
            last[nxt[k]] = -1
        head[mindeg] = nxt[k]
        elenk = elen[k]
        nvk = nv[k]
        nel += nvk

        # garbage collection
        if elenk > 0 and cnz + mindeg >= nzmax:
            for j in range(n):
                p = Cp[j]
                if p >= 0:
                    Cp[j] = Ci[p]
                    Ci[p] = _flip(j)
            q = 0
            p = 0
            while p < cnz:
                j = _flip(Ci[p])
                p += 1
                if j >= 0:
                    Ci[q] = Cp[j]
                    Cp[j] = q
                    q += 1
                    for _ in range(ln_[j] - 1):
                        Ci[q] = Ci[p]
                        q += 1
                        p += 1
            cnz = q

        # construct new element
        dk = 0
        nv[k] = -nvk
        p = Cp[k]
        pk1 = p if elenk == 0 else cnz
        pk2 = pk1
        for k1 in range(1, elenk + 2):
            if k1 > elenk:
                e = k
                pj = p
                ln = ln_[k] - elenk
            else:
                e = Ci[p]
                p += 1
                pj = Cp[e]
                ln = ln_[e]
            for _ in range(ln):
                i = Ci[pj]
                pj += 1
                nvi = nv[i]
                if nvi <= 0:
                    continue
                dk += nvi
                nv[i] = -nvi
                Ci[pk2] = i
                pk2 += 1
                if nxt[i] != -1:
                    last[nxt[i]] = last[i]
                if last[i] != -1:
                    nxt[last[i]] = nxt[i]
                else:
                    head[degree[i]] = nxt[i]
            if e != k:
                Cp[e] = _flip(k)
                w[e] = 0
        if elenk != 0:
            cnz = pk2
        degree[k] = dk
        Cp[k] = pk1
        ln_[k] = pk2 - pk1
        elen[k] = -2

        # find set differences |Le \ Lk|
        mark = _wclear(mark, lemax, w, n)
        for pk in range(pk1, pk2):
            i = Ci[pk]
            eln = elen[i]
            if eln <= 0:
                continue
            nvi = -nv[i]
            wnvi = mark - nvi
            for p in range(Cp[i], Cp[i] + eln):
                e = Ci[p]
                if w[e] >= mark:
                    w[e] -= nvi
                elif w[e] != 0:
                    w[e] = degree[e] + wnvi

        # degree update
        for pk in range(pk1, pk2):
            i = Ci[pk]
            p1 = Cp[i]
            p2 = p1 + elen[i] - 1
            pn = p1
            h = 0
            d = 0
            for p in range(p1, p2 + 1):
                e = Ci[p]
                if w[e] != 0:
                    dext = w[e] - mark
                    if dext > 0:
                        d += dext
                        Ci[pn] = e
                        pn += 1
                        h += e
                    else:
                        Cp[e] = _flip(k)
                        w[e] = 0
            elen[i] = pn - p1 + 1
            p3 = pn
            p4 = p1 + ln_[i]
            for p in range(p2 + 1, p4):
                j = Ci[p]
                nvj = nv[j]
                if nvj <= 0:
                    continue
                d += nvj
                Ci[pn] = j
                pn += 1
                h += j
            if d == 0:
                # mass elimination
                Cp[i] = _flip(k)
                nvi = -nv[i]
                dk -= nvi
                nvk += nvi
                nel += nvi
                nv[i] = 0
                elen[i] = -1
            else:
                degree[i] = min(degree[i], d)
                Ci[pn] = Ci[p3]
                Ci[p3] = Ci[p1]
                Ci[p1] = k
                ln_[i] = pn - p1 + 1
                h = h % n
                nxt[i] = hhead[h]
                hhead[h] = i
                last[i] = h
        degree[k] = dk
        lemax = max(lemax, dk)
        mark = _wclear(mark + lemax, lemax, w, n)

        # supernode detection
        for pk in range(pk1, pk2):
            i = Ci[pk]
            if nv[i] >= 0:
                continue
            h = last[i]
            i = hhead[h]
            hhead[h] = -1
            while i != -1 and nxt[i] != -1:
                ln = ln_[i]
                eln = elen[i]
                for p in range(Cp[i] + 1, Cp[i] + ln):
                    w[Ci[p]] = mark
                jlast = i
                j = nxt[i]
                while j != -1:
                    ok = ln_[j] == ln and elen[j] == eln
                    p = Cp[j] + 1
                    while ok and p <= Cp[j] + ln - 1:
                        if w[Ci[p]] != mark:
                            ok = False
                        p += 1
                    if ok:
                        Cp[j] = _flip(i)
                        nv[i] += nv[j]
                        nv[j] = 0
                        elen[j] = -1
                        j = nxt[j]
                        nxt[jlast] = j
                    else:
                        jlast = j
                        j = nxt[j]
                i = nxt[i]
                mark += 1

        # finalize new element
        p = pk1
        for pk in range(pk1, pk2):
            i = Ci[pk]
            nvi = -nv[i]
            if nvi <= 0:
                continue
            nv[i] = nvi
            d = degree[i] + dk - nvi
            d = min(d, n - nel - nvi)
            if head[d] != -1:
                last[head[d]] = i
            nxt[i] = head[d]
            last[i] = -1
            head[d] = i
            mindeg = min(mindeg, d)
            degree[i] = d
            Ci[p] = i
            p += 1
        nv[k] = nvk
        ln_[k] = p - pk1
        if ln_[k] == 0:
            Cp[k] = -1
            w[k] = 0
        if elenk != 0:
            cnz = p

    # postorder the assembly tree
    for i in range(n):
        Cp[i] = _flip(Cp[i])
    for j in range(n + 1):
        head[j] = -1
    for j in range(n, -1, -1):
        if nv[j] > 0:
            continue
        nxt[j] = head[Cp[j]]
        head[Cp[j]] = j
    for e in range(n, -1, -1):
        if nv[e] <= 0:
            continue
        if Cp[e] != -1:
            nxt[e] = head[Cp[e]]
            head[Cp[e]] = e
    k = 0
    for i in range(n + 1):
        if Cp[i] == -1:
            k = _tdfs(i, k, head, nxt, P, w)
    return P[:n].copy()


@njit(cache=True)
def etree(n, Up, Ui):
    """Elimination tree from the upper-triangular CSC structure."""
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        for p in range(Up[k], Up[k + 1]):
            i = Ui[p]
            while i != -1 and i < k:
                inext = ancestor[i]
                ancestor[i] = k
                if inext == -1:
                    parent[i] = k
                i = inext
    return parent


@njit(cache=True)
def _ereach(k, Up, Ui, parent, s, mark):
    """Nonzero pattern of row ``k`` of L, returned in ``s[top:n]``.

    ``mark`` uses the stamp ``k``; entries are in topological order.
    """
    n = s.shape[0]
    top = n
    mark[k] = k
    for p in range(Up[k], Up[k + 1]):
        i = Ui[p]
        if i > k:
            continue
        ln = 0
        while mark[i] != k:
            s[ln] = i
            ln += 1
            mark[i] = k
            i = parent[i]
        while ln > 0:
            top -= 1
            ln -= 1
            s[top] = s[ln]
    return top


@njit(cache=True)
def column_counts(n, Up, Ui, parent):
    """Column counts of L (diagonal included) via row subtrees."""
    counts = np.ones(n, dtype=np.int64)
    s = np.empty(n, dtype=np.int64)
    mark = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = _ereach(k, Up, Ui, parent, s, mark)
        for t in range(top, n):
            counts[s[t]] += 1
    return counts


@njit(cache=True)
def chol_numeric(n, Up, Ui, Ux, parent, Lp, Li, Lx):
    """Up-looking Cholesky of the permuted matrix held as upper CSC.

    Fills ``Li, Lx`` (diagonal first in each column).  Returns ``-1`` on
    success or the column at which a nonpositive pivot appeared.
    """
    c = Lp[:n].copy()
    x = np.zeros(n)
    s = np.empty(n, dtype=np.int64)
    mark = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = _ereach(k, Up, Ui, parent, s, mark)
        for p in range(Up[k], Up[k + 1]):
            i = Ui[p]
            if i <= k:
                x[i] = Ux[p]
        d = x[k]
        x[k] = 0.0
        for t in range(top, n):
            i = s[t]
            lki = x[i] / Lx[Lp[i]]
            x[i] = 0.0
            for p in range(Lp[i] + 1, c[i]):
                x[Li[p]] -= Lx[p] * lki
            d -= lki * lki
            p = c[i]
            c[i] += 1
            Li[p] = k
            Lx[p] = lki
        if not d > 0.0:
            return k
        p = c[k]
        c[k] += 1
        Li[p] = k
        Lx[p] = np.sqrt(d)
    return -1


@njit(cache=True)
def lsolve(n, Lp, Li, Lx, X):
    """In-place ``L \\ X`` for a 2-D right-hand side ``X`` of shape (n, m)."""
    m = X.shape[1]
    for j in range(n):
        djj = Lx[Lp[j]]
        for r in range(m):
            X[j, r] /= djj
        for p in range(Lp[j] + 1, Lp[j + 1]):
            i = Li[p]
            lij = Lx[p]
            for r in range(m):
                X[i, r] -= lij * X[j, r]


@njit(cache=True)
def ltsolve(n, Lp, Li, Lx, X):
    """In-place ``L' \\ X`` for a 2-D right-hand side."""
    m = X.shape[1]
    for j in range(n - 1, -1, -1):
        for p in range(Lp[j] + 1, Lp[j + 1]):
            i = Li[p]
            lij = Lx[p]
            for r in range(m):
                X[j, r] -= lij * X[i, r]
        djj = Lx[Lp[j]]
        for r in range(m):
            X[j, r] /= djj


@njit(cache=True)
def _ereach_below(k, limit, Up, Ui, parent, s, mark):
    """Like ``_ereach`` but restricted to pivots ``< limit``.

    Ancestors of a pivot below ``limit`` that reach ``limit`` or beyond are
    cut off; since parents are larger than children the order stays
    topological.
    """
    n = s.shape[0]
    top = n
    for p in range(Up[k], Up[k + 1]):
        i = Ui[p]
        if i >= limit:
            continue
        ln = 0
        while i < limit and mark[i] != k:
            s[ln] = i
            ln += 1
            mark[i] = k
            i = parent[i]
        while ln > 0:
            top -= 1
            ln -= 1
            s[top] = s[ln]
    return top


@njit(cache=True)
def trailing_columns(n, k0, Up, Ui, parent):
    """Map each leading column with entries in rows ``>= k0`` to a compact index."""
    wcol = np.full(max(k0, 1), -1, dtype=np.int64)
    s = np.empty(n, dtype=np.int64)
    mark = np.full(n, -1, dtype=np.int64)
    nw = 0
    for k in range(k0, n):
        top = _ereach_below(k, k0, Up, Ui, parent, s, mark)
        for t in range(top, n):
            i = s[t]
            if wcol[i] < 0:
                wcol[i] = nw
                nw += 1
    return wcol[:k0], nw


@njit(cache=True)
def chol_numeric_split(n, k0, Up, Ui, Ux, parent, Lp, Li, Lx, wcol, W, S):
    """Sparse part of a factorization whose trailing block ``k0:`` is dense.

    Columns ``< k0`` are factored up-looking.  For trailing rows only the
    solve against the leading factor is done; those row pieces go both into
    ``L`` and into ``W`` (compact columns), and the trailing block of the
    matrix is scattered into the dense ``S`` (lower triangle).  The caller
    finishes with ``S - W W'`` and a dense Cholesky.  Returns ``-1`` or the
    failing pivot.
    """
    c = Lp[:n].copy()
    x = np.zeros(n)
    s = np.empty(n, dtype=np.int64)
    mark = np.full(n, -1, dtype=np.int64)
    for k in range(k0):
        top = _ereach(k, Up, Ui, parent, s, mark)
        for p in range(Up[k], Up[k + 1]):
            i = Ui[p]
            if i <= k:
                x[i] = Ux[p]
        d = x[k]
        x[k] = 0.0
        for t in range(top, n):
            i = s[t]
            lki = x[i] / Lx[Lp[i]]
            x[i] = 0.0
            for p in range(Lp[i] + 1, c[i]):
                x[Li[p]] -= Lx[p] * lki
            d -= lki * lki
            p = c[i]
            c[i] += 1
            Li[p] = k
            Lx[p] = lki
        if not d > 0.0:
            return k
        p = c[k]
        c[k] += 1
        Li[p] = k
        Lx[p] = np.sqrt(d)
    for k in range(k0, n):
        top = _ereach_below(k, k0, Up, Ui, parent, s, mark)
        for p in range(Up[k], Up[k + 1]):
            i = Ui[p]
            if i < k0:
                x[i] = Ux[p]
            elif i <= k:
                S[k - k0, i - k0] = Ux[p]
        for t in range(top, n):
            i = s[t]
            lki = x[i] / Lx[Lp[i]]
            x[i] = 0.0
            for p in range(Lp[i] + 1, c[i]):
                j = Li[p]
                if j >= k0:
                    break
                x[j] -= Lx[p] * lki
            p = c[i]
            c[i] += 1
            Li[p] = k
            Lx[p] = lki
            W[k - k0, wcol[i]] = lki
    return -1


@njit(cache=True)
def store_trailing(n, k0, Lp, Li, Lx, L22):
    """Copy the dense lower factor of the trailing block into CSC storage."""
    for j in range(k0, n):
        p = Lp[j]
        for r in range(j, n):
            Li[p] = r
            Lx[p] = L22[r - k0, j - k0]
            p += 1
