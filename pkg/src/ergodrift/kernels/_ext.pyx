# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot sequential loops.

These perform the same floating-point operations in the same order as
the pure-Python mirrors in _purepy.py; the extension is compiled with
-ffp-contract=off so results agree bit for bit.  The Fourier walk here
accumulates sequentially (the mirror sums in chunks, see _purepy).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, floor, log, sin, sqrt

cnp.import_array()

BACKEND_NAME = "cython"


def chain_logscale(gens, letters):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] g = np.ascontiguousarray(gens, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ls = np.ascontiguousarray(letters, dtype=np.int64)
    cdef int d = g.shape[1]
    cdef Py_ssize_t n = ls.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p_arr = np.eye(d, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q_arr = np.zeros((d, d), dtype=np.float64)
    cdef double[:, :] p = p_arr
    cdef double[:, :] q = q_arr
    cdef double[:, :, :] gv = g
    cdef double logscale = 0.0
    cdef double s, f2, f, x
    cdef Py_ssize_t t, i, j, k, a
    cdef double[:, :] tmp
    for t in range(n):
        a = ls[t]
        for i in range(d):
            for k in range(d):
                s = 0.0
                for j in range(d):
                    s += p[i, j] * gv[a, j, k]
                q[i, k] = s
        f2 = 0.0
        for i in range(d):
            for j in range(d):
                x = q[i, j]
                f2 += x * x
        f = sqrt(f2)
        logscale += log(f)
        for i in range(d):
            for j in range(d):
                q[i, j] /= f
        tmp = p
        p = q
        q = tmp
    out = np.asarray(p).copy()
    return out, logscale


def backward_increments(gens, letters, v0, v1):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] g = np.ascontiguousarray(gens, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ls = np.ascontiguousarray(letters, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr = np.array(v0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u_arr = np.array(v1, dtype=np.float64)
    cdef int d = g.shape[1]
    cdef Py_ssize_t n = ls.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] incr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] agree = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gw_arr = np.zeros(d, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gu_arr = np.zeros(d, dtype=np.float64)
    cdef double[:] w = w_arr
    cdef double[:] u = u_arr
    cdef double[:] gw = gw_arr
    cdef double[:] gu = gu_arr
    cdef double[:, :, :] gv = g
    cdef double c, s2, r, sw, su, nw2, nu2, nw, nu
    cdef Py_ssize_t j, i, k, a
    for j in range(n - 1, -1, -1):
        c = 0.0
        for i in range(d):
            c += w[i] * u[i]
        s2 = 0.0
        for i in range(d):
            r = w[i] - c * u[i]
            s2 += r * r
        agree[j] = sqrt(s2)
        a = ls[j]
        for i in range(d):
            sw = 0.0
            su = 0.0
            for k in range(d):
                sw += gv[a, i, k] * w[k]
                su += gv[a, i, k] * u[k]
            gw[i] = sw
            gu[i] = su
        nw2 = 0.0
        nu2 = 0.0
        for i in range(d):
            nw2 += gw[i] * gw[i]
            nu2 += gu[i] * gu[i]
        nw = sqrt(nw2)
        nu = sqrt(nu2)
        incr[j] = log(nw)
        for i in range(d):
            w[i] = gw[i] / nw
            u[i] = gu[i] / nu
    return incr, agree


def torus_walk_positions(gens, x0, letters):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] g = np.ascontiguousarray(gens, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ls = np.ascontiguousarray(letters, dtype=np.int64)
    cdef int d = g.shape[1]
    cdef Py_ssize_t n = ls.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.empty((n + 1, d), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_arr = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y_arr = np.zeros(d, dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef double[:] x = x_arr
    cdef double[:] y = y_arr
    cdef double[:, :, :] gv = g
    cdef double s
    cdef Py_ssize_t t, i, j, a
    cdef double[:] tmp
    for i in range(d):
        out[0, i] = x[i]
    for t in range(n):
        a = ls[t]
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += gv[a, i, j] * x[j]
            y[i] = s - floor(s)
        tmp = x
        x = y
        y = tmp
        for i in range(d):
            out[t + 1, i] = x[i]
    return out_arr


def torus_walk_fourier(gens, x0, letters, kvecs, include_start):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] g = np.ascontiguousarray(gens, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ls = np.ascontiguousarray(letters, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] km = np.ascontiguousarray(kvecs, dtype=np.float64)
    cdef int d = g.shape[1]
    cdef Py_ssize_t n = ls.shape[0]
    cdef Py_ssize_t m = km.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] re_arr = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] im_arr = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_arr = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y_arr = np.zeros(d, dtype=np.float64)
    cdef double[:] acc_re = re_arr
    cdef double[:] acc_im = im_arr
    cdef double[:] x = x_arr
    cdef double[:] y = y_arr
    cdef double[:, :, :] gv = g
    cdef double[:, :] kv = km
    cdef int start = 1 if include_start else 0
    cdef double s, ph, ang
    cdef double two_pi = 2.0 * 3.141592653589793
    cdef Py_ssize_t t, i, j, q, a
    cdef double[:] tmp
    for t in range(n):
        if start:
            for q in range(m):
                ph = 0.0
                for j in range(d):
                    ph += kv[q, j] * x[j]
                ph -= floor(ph)
                ang = two_pi * ph
                acc_re[q] += cos(ang)
                acc_im[q] += sin(ang)
        a = ls[t]
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += gv[a, i, j] * x[j]
            y[i] = s - floor(s)
        tmp = x
        x = y
        y = tmp
        if not start:
            for q in range(m):
                ph = 0.0
                for j in range(d):
                    ph += kv[q, j] * x[j]
                ph -= floor(ph)
                ang = two_pi * ph
                acc_re[q] += cos(ang)
                acc_im[q] += sin(ang)
    return re_arr, im_arr, np.asarray(x).copy()
