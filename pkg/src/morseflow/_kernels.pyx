# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Signatures match ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def element_matrices(double[:, ::1] e1, double[:, ::1] e2,
                     double[:, :, ::1] a_tri, double[::1] area_scale):
    cdef Py_ssize_t m = e1.shape[0]
    ka_arr = np.empty((m, 3, 3), dtype=np.float64)
    me_arr = np.empty((m, 3, 3), dtype=np.float64)
    cdef double[:, :, ::1] ka = ka_arr
    cdef double[:, :, ::1] me = me_arr
    cdef double g[3][2]
    cdef double det, area, w, a00, a01, a10, a11
    cdef Py_ssize_t t, i, j
    for t in range(m):
        det = e1[t, 0] * e2[t, 1] - e1[t, 1] * e2[t, 0]
        area = 0.5 * det
        g[1][0] = e2[t, 1] / det
        g[1][1] = -e2[t, 0] / det
        g[2][0] = -e1[t, 1] / det
        g[2][1] = e1[t, 0] / det
        g[0][0] = -(g[1][0] + g[2][0])
        g[0][1] = -(g[1][1] + g[2][1])
        a00 = a_tri[t, 0, 0]
        a01 = a_tri[t, 0, 1]
        a10 = a_tri[t, 1, 0]
        a11 = a_tri[t, 1, 1]
        w = area * area_scale[t]
        for i in range(3):
            for j in range(i, 3):
                ka[t, i, j] = area * (
                    g[i][0] * (a00 * g[j][0] + a01 * g[j][1])
                    + g[i][1] * (a10 * g[j][0] + a11 * g[j][1]))
                # mirror so the local matrix is exactly symmetric
                ka[t, j, i] = ka[t, i, j]
                me[t, i, j] = w * (2.0 if i == j else 1.0) / 12.0
                me[t, j, i] = me[t, i, j]
    return ka_arr, me_arr


def lower_link_runs(cnp.int64_t[::1] rank, cnp.int64_t[::1] link_ptr,
                    cnp.int64_t[::1] link_idx, cnp.uint8_t[::1] link_closed):
    cdef Py_ssize_t n = link_ptr.shape[0] - 1
    runs_arr = np.zeros(n, dtype=np.int64)
    lower_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] runs = runs_arr
    cdef cnp.int64_t[::1] n_lower = lower_arr
    cdef Py_ssize_t v, p, start, stop
    cdef bint cur, prev
    for v in range(n):
        start = link_ptr[v]
        stop = link_ptr[v + 1]
        if stop == start:
            continue
        if link_closed[v]:
            prev = rank[link_idx[stop - 1]] < rank[v]
        else:
            prev = False
        for p in range(start, stop):
            cur = rank[link_idx[p]] < rank[v]
            if cur:
                n_lower[v] += 1
                if not prev:
                    runs[v] += 1
            prev = cur
    return runs_arr, lower_arr


def segment_sum(double[::1] values, cnp.int64_t[::1] starts):
    cdef Py_ssize_t ns = starts.shape[0]
    cdef Py_ssize_t nv = values.shape[0]
    out_arr = np.zeros(ns, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t s, i, stop
    cdef double acc
    for s in range(ns):
        stop = starts[s + 1] if s + 1 < ns else nv
        acc = 0.0
        for i in range(starts[s], stop):
            acc += values[i]
        out[s] = acc
    return out_arr
