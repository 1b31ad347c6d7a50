"""Hot numeric loops, each with a numba kernel and a pure-numpy twin.

The public names at the bottom dispatch to one or the other according to
:data:`gridshed._accel.USE_NUMBA`. Both variants stay importable
(``*_nb`` / ``*_np``) so tests and ``benchmarks/bench_kernels.py`` can
compare them directly.
"""

import numpy as np
from scipy.signal import lfilter

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Scaled-simplex projection, one row per hour


@njit(cache=True)
def project_simplex_rows_nb(values, totals):
    n_rows, n = values.shape
    out = np.empty_like(values)
    for t in range(n_rows):
        row = values[t]
        total = totals[t]
        u = np.sort(row)[::-1]
        # rho >= 0 always holds; seed theta with the one-element support
        theta = u[0] - total
        css = 0.0
        for j in range(n):
            css += u[j]
            cand = (css - total) / (j + 1)
            if u[j] - cand > 0.0:
                theta = cand
        for j in range(n):
            v = row[j] - theta
            out[t, j] = v if v > 0.0 else 0.0
    return out


def project_simplex_rows_np(values, totals):
    values = np.asarray(values, dtype=np.float64)
    totals = np.asarray(totals, dtype=np.float64)
    n_rows, n = values.shape
    u = -np.sort(-values, axis=1)
    css = np.cumsum(u, axis=1) - totals[:, None]
    cond = u - css / np.arange(1, n + 1) > 0.0
    cond[:, 0] = True
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n_rows), rho] / (rho + 1)
    return np.maximum(values - theta[:, None], 0.0)


# ---------------------------------------------------------------------------
# Conditional-sum-of-squares residual recursion
#   e_t = w_t - sum_i ar[i] w_{t-1-i} - sum_j ma[j] e_{t-1-j},  t >= start
# with e_t = 0 before ``start``.


@njit(cache=True)
def css_residuals_nb(w, ar, ma, start):
    n = w.shape[0]
    e = np.zeros(n)
    for t in range(start, n):
        acc = w[t]
        for i in range(ar.shape[0]):
            acc -= ar[i] * w[t - 1 - i]
        for j in range(min(ma.shape[0], t)):
            acc -= ma[j] * e[t - 1 - j]
        e[t] = acc
    return e


def css_residuals_np(w, ar, ma, start):
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    e = np.zeros(n)
    if start >= n:
        return e
    u = w[start:].copy()
    for i, a in enumerate(ar):
        u -= a * w[start - 1 - i : n - 1 - i]
    e[start:] = lfilter([1.0], np.concatenate(([1.0], np.asarray(ma, dtype=np.float64))), u)
    return e


# ---------------------------------------------------------------------------
# Squared Euclidean distances and nearest-centre assignment


@njit(cache=True)
def sq_distances_nb(x, c):
    n, d = x.shape
    k = c.shape[0]
    out = np.empty((n, k))
    for i in range(n):
        for j in range(k):
            acc = 0.0
            for m in range(d):
                diff = x[i, m] - c[j, m]
                acc += diff * diff
            out[i, j] = acc
    return out


def sq_distances_np(x, c):
    diff = np.asarray(x, dtype=np.float64)[:, None, :] - np.asarray(c, dtype=np.float64)[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@njit(cache=True)
def assign_nearest_nb(x, c):
    d2 = sq_distances_nb(x, c)
    n, k = d2.shape
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n)
    for i in range(n):
        lab = 0
        val = d2[i, 0]
        for j in range(1, k):
            # strict comparison keeps the lowest index on ties
            if d2[i, j] < val:
                val = d2[i, j]
                lab = j
        labels[i] = lab
        best[i] = val
    return labels, best


def assign_nearest_np(x, c):
    d2 = sq_distances_np(x, c)
    labels = np.argmin(d2, axis=1).astype(np.int64)
    return labels, d2[np.arange(d2.shape[0]), labels]


# ---------------------------------------------------------------------------
# Mini-batch k-means step (per-centre learning rate 1 / assignment count)


@njit(cache=True)
def minibatch_step_nb(batch, centers, counts):
    labels, _ = assign_nearest_nb(batch, centers)
    d = batch.shape[1]
    for i in range(batch.shape[0]):
        c = labels[i]
        counts[c] += 1.0
        eta = 1.0 / counts[c]
        for m in range(d):
            centers[c, m] += eta * (batch[i, m] - centers[c, m])
    return labels


def minibatch_step_np(batch, centers, counts):
    labels, _ = assign_nearest_np(batch, centers)
    k, d = centers.shape
    m = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, d))
    np.add.at(sums, labels, batch)
    hit = m > 0
    # sequential 1/count updates collapse to a running mean
    centers[hit] = (counts[hit, None] * centers[hit] + sums[hit]) / (counts[hit] + m[hit])[:, None]
    counts += m
    return labels


# ---------------------------------------------------------------------------
# Ward agglomeration via the Lance-Williams recurrence on squared distances.
# Returns merges (pairs of representative indices, the survivor first) and
# merge heights sqrt(d_ij).


@njit(cache=True)
def ward_merges_nb(d2):
    n = d2.shape[0]
    d = d2.copy()
    size = np.ones(n)
    active = np.ones(n, dtype=np.bool_)
    merges = np.empty((n - 1, 2), dtype=np.int64)
    heights = np.empty(n - 1)
    for step in range(n - 1):
        bi = -1
        bj = -1
        best = np.inf
        for i in range(n):
            if not active[i]:
                continue
            for j in range(i + 1, n):
                if active[j] and d[i, j] < best:
                    best = d[i, j]
                    bi = i
                    bj = j
        ni = size[bi]
        nj = size[bj]
        for k in range(n):
            if active[k] and k != bi and k != bj:
                nk = size[k]
                v = ((ni + nk) * d[k, bi] + (nj + nk) * d[k, bj] - nk * best) / (ni + nj + nk)
                d[k, bi] = v
                d[bi, k] = v
        active[bj] = False
        size[bi] = ni + nj
        merges[step, 0] = bi
        merges[step, 1] = bj
        heights[step] = np.sqrt(max(best, 0.0))
    return merges, heights


def ward_merges_np(d2):
    n = d2.shape[0]
    d = np.array(d2, dtype=np.float64)
    d[np.tril_indices(n)] = np.inf
    full = np.array(d2, dtype=np.float64)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    merges = np.empty((n - 1, 2), dtype=np.int64)
    heights = np.empty(n - 1)
    for step in range(n - 1):
        flat = int(np.argmin(d))
        bi, bj = divmod(flat, n)
        best = full[bi, bj]
        ni, nj = size[bi], size[bj]
        others = active.copy()
        others[[bi, bj]] = False
        nk = size[others]
        v = ((ni + nk) * full[others, bi] + (nj + nk) * full[others, bj] - nk * best) / (ni + nj + nk)
        full[others, bi] = v
        full[bi, others] = v
        idx = np.flatnonzero(others)
        upper = idx > bi
        d[bi, idx[upper]] = v[upper]
        d[idx[~upper], bi] = v[~upper]
        d[bj, :] = np.inf
        d[:, bj] = np.inf
        active[bj] = False
        size[bi] = ni + nj
        merges[step] = (bi, bj)
        heights[step] = np.sqrt(max(best, 0.0))
    return merges, heights


# ---------------------------------------------------------------------------
# Cyclic Jacobi eigensolver for symmetric matrices (unsorted output)


@njit(cache=True)
def jacobi_eigh_nb(a, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    scale = np.sqrt(scale)
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if np.sqrt(off) <= tol * scale or off == 0.0:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                at = abs(theta)
                # sqrt(theta^2 + 1) ~ |theta| once theta^2 would overflow
                t = sgn / (at + (np.sqrt(theta * theta + 1.0) if at < 1e150 else at))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v, sweeps


def jacobi_eigh_np(a, tol, max_sweeps):
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    iu = np.triu_indices(n, 1)
    sweeps = 0
    for _ in range(max_sweeps):
        off = 2.0 * np.sum(a[iu] ** 2)
        if np.sqrt(off) <= tol * scale or off == 0.0:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                at = abs(theta)
                # sqrt(theta^2 + 1) ~ |theta| once theta^2 would overflow
                t = sgn / (at + (np.sqrt(theta * theta + 1.0) if at < 1e150 else at))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweeps


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    project_simplex_rows = project_simplex_rows_nb
    css_residuals = css_residuals_nb
    sq_distances = sq_distances_nb
    assign_nearest = assign_nearest_nb
    minibatch_step = minibatch_step_nb
    ward_merges = ward_merges_nb
    jacobi_eigh = jacobi_eigh_nb
else:
    project_simplex_rows = project_simplex_rows_np
    css_residuals = css_residuals_np
    sq_distances = sq_distances_np
    assign_nearest = assign_nearest_np
    minibatch_step = minibatch_step_np
    ward_merges = ward_merges_np
    jacobi_eigh = jacobi_eigh_np
