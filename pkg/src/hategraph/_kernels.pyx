# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels (see ``_fallback`` for the reference)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()


def tree_distances(parents):
    """All-pairs hop distances of a rooted tree, one breadth-first search per node."""
    cdef cnp.int64_t[::1] par = np.ascontiguousarray(parents, dtype=np.int64)
    cdef Py_ssize_t n = par.shape[0]
    cdef Py_ssize_t i, u, v, e, head, tail
    cdef cnp.int64_t[::1] deg = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if par[i] >= 0:
            deg[i + 1] += 1
            deg[par[i] + 1] += 1
    for i in range(n):
        deg[i + 1] += deg[i]
    cdef cnp.int64_t[::1] adj = np.empty(deg[n], dtype=np.int64)
    cdef cnp.int64_t[::1] fill = np.array(deg[:n], dtype=np.int64)
    for i in range(n):
        if par[i] >= 0:
            adj[fill[i]] = par[i]
            fill[i] += 1
            adj[fill[par[i]]] = i
            fill[par[i]] += 1

    out_arr = np.full((n, n), -1, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef cnp.int64_t[::1] queue = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i, i] = 0
        queue[0] = i
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for e in range(deg[u], deg[u + 1]):
                v = adj[e]
                if out[i, v] < 0:
                    out[i, v] = out[i, u] + 1
                    queue[tail] = v
                    tail += 1
    return out_arr


def biased_softmax(scores, bias, dist):
    cdef double[:, :, ::1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(bias, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] d = np.ascontiguousarray(dist, dtype=np.int64)
    cdef Py_ssize_t H = s.shape[0], n = s.shape[1]
    out_arr = np.empty((H, n, n), dtype=np.float64)
    cdef double[:, :, ::1] p = out_arr
    cdef Py_ssize_t h, i, j
    cdef double m, t, tot
    for h in range(H):
        for i in range(n):
            m = -INFINITY
            for j in range(n):
                t = s[h, i, j] + b[h, d[i, j]]
                p[h, i, j] = t
                if t > m:
                    m = t
            tot = 0.0
            for j in range(n):
                t = exp(p[h, i, j] - m)
                p[h, i, j] = t
                tot += t
            for j in range(n):
                p[h, i, j] /= tot
    return out_arr


def biased_softmax_backward(probs, dprobs, dist, Py_ssize_t num_bias):
    cdef double[:, :, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef double[:, :, ::1] dp = np.ascontiguousarray(dprobs, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] d = np.ascontiguousarray(dist, dtype=np.int64)
    cdef Py_ssize_t H = p.shape[0], n = p.shape[1]
    ds_arr = np.empty((H, n, n), dtype=np.float64)
    db_arr = np.zeros((H, num_bias), dtype=np.float64)
    cdef double[:, :, ::1] ds = ds_arr
    cdef double[:, ::1] db = db_arr
    cdef Py_ssize_t h, i, j
    cdef double dot, g
    for h in range(H):
        for i in range(n):
            dot = 0.0
            for j in range(n):
                dot += dp[h, i, j] * p[h, i, j]
            for j in range(n):
                g = p[h, i, j] * (dp[h, i, j] - dot)
                ds[h, i, j] = g
                db[h, d[i, j]] += g
    return ds_arr, db_arr


def neighbor_attention(z, s_src, s_dst, indptr, indices, double slope):
    cdef double[:, :, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[:, ::1] a = np.ascontiguousarray(s_src, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(s_dst, dtype=np.float64)
    cdef cnp.int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t H = zv.shape[0], n = zv.shape[1], dh = zv.shape[2]
    cdef Py_ssize_t nnz = idx.shape[0]
    alpha_arr = np.empty((H, nnz), dtype=np.float64)
    raw_arr = np.empty((H, nnz), dtype=np.float64)
    out_arr = np.zeros((H, n, dh), dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] raw = raw_arr
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t h, i, e, j, k
    cdef double t, m, tot, w
    for h in range(H):
        for i in range(n):
            m = -INFINITY
            for e in range(ptr[i], ptr[i + 1]):
                t = a[h, i] + c[h, idx[e]]
                raw[h, e] = t
                if t <= 0:
                    t = slope * t
                alpha[h, e] = t
                if t > m:
                    m = t
            tot = 0.0
            for e in range(ptr[i], ptr[i + 1]):
                t = exp(alpha[h, e] - m)
                alpha[h, e] = t
                tot += t
            for e in range(ptr[i], ptr[i + 1]):
                w = alpha[h, e] / tot
                alpha[h, e] = w
                j = idx[e]
                for k in range(dh):
                    out[h, i, k] += w * zv[h, j, k]
    return out_arr, (alpha_arr, raw_arr, np.asarray(zv), np.asarray(ptr), np.asarray(idx), slope)


def neighbor_attention_backward(dout, cache):
    alpha_arr, raw_arr, z_arr, ptr_arr, idx_arr, slope_obj = cache
    cdef double slope = slope_obj
    cdef double[:, :, ::1] g = np.ascontiguousarray(dout, dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] raw = raw_arr
    cdef double[:, :, ::1] zv = z_arr
    cdef cnp.int64_t[::1] ptr = ptr_arr
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef Py_ssize_t H = zv.shape[0], n = zv.shape[1], dh = zv.shape[2]
    cdef Py_ssize_t nnz = idx.shape[0]
    dz_arr = np.zeros((H, n, dh), dtype=np.float64)
    da_arr = np.zeros((H, n), dtype=np.float64)
    dc_arr = np.zeros((H, n), dtype=np.float64)
    dal_arr = np.empty(nnz, dtype=np.float64)
    cdef double[:, :, ::1] dz = dz_arr
    cdef double[:, ::1] da = da_arr
    cdef double[:, ::1] dc = dc_arr
    cdef double[::1] dal = dal_arr
    cdef Py_ssize_t h, i, e, j, k
    cdef double t, dot, w
    for h in range(H):
        for i in range(n):
            dot = 0.0
            for e in range(ptr[i], ptr[i + 1]):
                j = idx[e]
                w = alpha[h, e]
                t = 0.0
                for k in range(dh):
                    t += g[h, i, k] * zv[h, j, k]
                    dz[h, j, k] += w * g[h, i, k]
                dal[e] = t
                dot += w * t
            for e in range(ptr[i], ptr[i + 1]):
                t = alpha[h, e] * (dal[e] - dot)
                if raw[h, e] <= 0:
                    t = slope * t
                da[h, i] += t
                dc[h, idx[e]] += t
    return dz_arr, da_arr, dc_arr


def neighbor_attention_weights(cache):
    alpha_arr, raw_arr, z_arr, ptr_arr, idx_arr, slope = cache
    cdef Py_ssize_t H = alpha_arr.shape[0], n = ptr_arr.shape[0] - 1
    dense = np.zeros((H, n, n), dtype=np.float64)
    rows = np.repeat(np.arange(n), np.diff(ptr_arr))
    dense[:, rows, idx_arr] = alpha_arr
    return dense
