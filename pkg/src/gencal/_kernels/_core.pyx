# cython: language_level=3
"""Compiled kernels: splitmix64 stream, random variates, tree growth.

Mirrors ``fallback.py`` operation for operation; both flavours consume
the random stream in the same order and make the same floating-point
comparisons, so integer outputs (draws, indices, tree structures) are
interchangeable between them.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, floor, lgamma, log, sin, sqrt

cnp.import_array()

cdef extern from "math.h":
    double M_PI

cdef double U53 = 1.0 / 9007199254740992.0
cdef int INVERSION_CAP = 200

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL
cdef unsigned long long MIX1 = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long MIX2 = 0x94D049BB133111EBULL


cdef inline unsigned long long _out_at(unsigned long long seed, unsigned long long pos) nogil:
    # splitmix64 output at stream position pos (0-based)
    cdef unsigned long long z = seed + (pos + 1) * GOLDEN
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


def raw64(seed, start, n):
    cdef unsigned long long s = seed, st = start
    cdef Py_ssize_t i, m = n
    out = np.empty(m, dtype=np.uint64)
    cdef unsigned long long[::1] o = out
    with nogil:
        for i in range(m):
            o[i] = _out_at(s, st + i)
    return out


def uniforms(seed, start, n):
    cdef unsigned long long s = seed, st = start
    cdef Py_ssize_t i, m = n
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(m):
            o[i] = <double>(_out_at(s, st + i) >> 11) * U53
    return out


def normals(seed, start, n):
    cdef unsigned long long s = seed, st = start
    cdef Py_ssize_t j, m = n, pairs = (n + 1) // 2
    out = np.empty(2 * pairs, dtype=np.float64)
    cdef double[::1] o = out
    cdef double u1, u2, rad, ang
    with nogil:
        for j in range(pairs):
            u1 = <double>((_out_at(s, st + 2 * j) >> 11) + 1) * U53
            u2 = <double>(_out_at(s, st + 2 * j + 1) >> 11) * U53
            rad = sqrt(-2.0 * log(u1))
            ang = (2.0 * M_PI) * u2
            o[2 * j] = rad * cos(ang)
            o[2 * j + 1] = rad * sin(ang)
    return out[:m], 2 * pairs


cdef long _ptrs_one(double lam, double loglam, unsigned long long seed,
                    unsigned long long *ctr) nogil:
    cdef double b = 0.931 + 2.53 * sqrt(lam)
    cdef double a = -0.059 + 0.02483 * b
    cdef double inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    cdef double v_r = 0.9277 - 3.6224 / (b - 2.0)
    cdef double u, v, us, kf
    while True:
        u = <double>(_out_at(seed, ctr[0]) >> 11) * U53 - 0.5
        v = <double>(_out_at(seed, ctr[0] + 1) >> 11) * U53
        ctr[0] += 2
        us = 0.5 - fabs(u)
        kf = floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return <long>kf
        if kf < 0.0 or (us < 0.013 and v > us):
            continue
        if v <= 0.0 or kf > 4.0e18:
            continue
        if (log(v) + log(inv_alpha) - log(a / (us * us) + b)
                <= kf * loglam - lam - lgamma(kf + 1.0)):
            return <long>kf


def poisson(seed, start, cnp.ndarray[cnp.float64_t, ndim=1] lam,
            cnp.ndarray[cnp.float64_t, ndim=1] pexp,
            cnp.ndarray[cnp.float64_t, ndim=1] loglam):
    cdef unsigned long long s = seed, ctr = start
    cdef Py_ssize_t i, n = lam.shape[0]
    out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] o = out
    cdef double[::1] lv = lam, pe = pexp, ll = loglam
    cdef double u, p, acc, lam_i
    cdef long k
    with nogil:
        # regime order: all lam < 10 first (one uniform each, element order)
        for i in range(n):
            lam_i = lv[i]
            if lam_i < 10.0:
                u = <double>(_out_at(s, ctr) >> 11) * U53
                ctr += 1
                p = pe[i]
                acc = p
                k = 0
                while u > acc and k < INVERSION_CAP:
                    k += 1
                    p *= lam_i / k
                    acc += p
                o[i] = k
        for i in range(n):
            if lv[i] >= 10.0:
                o[i] = _ptrs_one(lv[i], ll[i], s, &ctr)
    return out, ctr - start


def fisher_yates_take(seed, start, n, k):
    cdef unsigned long long s = seed, st = start
    cdef Py_ssize_t i, j, m = n, kk = k
    cdef double u
    a = np.arange(m, dtype=np.int64)
    cdef long long[::1] av = a
    cdef long long tmp
    with nogil:
        for i in range(kk):
            u = <double>(_out_at(s, st + i) >> 11) * U53
            j = i + <Py_ssize_t>(u * (m - i))
            tmp = av[i]
            av[i] = av[j]
            av[j] = tmp
    return a[:kk].copy(), kk


def grow_tree(cnp.ndarray[cnp.float64_t, ndim=2] x,
              cnp.ndarray[cnp.float64_t, ndim=1] grad,
              cnp.ndarray[cnp.int32_t, ndim=2] order,
              depth, min_node):
    cdef Py_ssize_t m = x.shape[0], p = x.shape[1]
    cdef int dmax = depth
    cdef long nmin = min_node
    cdef int dcap = dmax if dmax < 20 else 20
    cdef Py_ssize_t max_nodes = (<Py_ssize_t>1 << (dcap + 1)) - 1

    feature = np.full(max_nodes, -1, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    node_of_row = np.zeros(m, dtype=np.int32)
    cdef int[::1] fv = feature
    cdef double[::1] tv = threshold
    cdef int[::1] lv = left
    cdef int[::1] rv = right
    cdef int[::1] nrow = node_of_row
    cdef double[:, ::1] xv = x
    cdef double[::1] gv = grad
    cdef int[:, ::1] ov = order

    cdef int n_active = 1
    active = np.zeros(max_nodes, dtype=np.int32)
    nxt = np.zeros(max_nodes, dtype=np.int32)
    cdef int[::1] act = active
    cdef int[::1] nxtv = nxt
    slot_of_node = np.full(max_nodes, -1, dtype=np.int32)
    cdef int[::1] slot = slot_of_node

    best_gain = np.empty(max_nodes, dtype=np.float64)
    best_feat = np.empty(max_nodes, dtype=np.int32)
    best_thr = np.empty(max_nodes, dtype=np.float64)
    tot_sum = np.empty(max_nodes, dtype=np.float64)
    tot_cnt = np.empty(max_nodes, dtype=np.int64)
    run_sum = np.empty(max_nodes, dtype=np.float64)
    run_cnt = np.empty(max_nodes, dtype=np.int64)
    prev_val = np.empty(max_nodes, dtype=np.float64)
    cdef double[::1] bg = best_gain
    cdef int[::1] bf = best_feat
    cdef double[::1] bt = best_thr
    cdef double[::1] ts = tot_sum
    cdef long long[::1] tc = tot_cnt
    cdef double[::1] rs = run_sum
    cdef long long[::1] rc = run_cnt
    cdef double[::1] pv = prev_val

    cdef Py_ssize_t n_nodes = 1
    cdef int level, f, nd, a, li, ri, n_nxt
    cdef Py_ssize_t ii, r
    cdef double val, g, s_l, s_r, tot, base
    cdef long c_l

    with nogil:
        for level in range(dmax):
            if n_active == 0:
                break
            for a in range(n_active):
                slot[act[a]] = a
                bg[a] = 0.0
                bf[a] = -1
            for f in range(p):
                # pass 1: per-node totals in this feature's sorted order
                for a in range(n_active):
                    ts[a] = 0.0
                    tc[a] = 0
                for ii in range(m):
                    r = ov[f, ii]
                    a = slot[nrow[r]]
                    if a >= 0:
                        ts[a] += gv[r]
                        tc[a] += 1
                # pass 2: scan split candidates left to right
                for a in range(n_active):
                    rs[a] = 0.0
                    rc[a] = 0
                for ii in range(m):
                    r = ov[f, ii]
                    nd = nrow[r]
                    a = slot[nd]
                    if a < 0:
                        continue
                    val = xv[r, f]
                    if rc[a] > 0 and val != pv[a]:
                        c_l = rc[a]
                        if c_l >= nmin and tc[a] - c_l >= nmin:
                            s_l = rs[a]
                            tot = ts[a]
                            s_r = tot - s_l
                            base = tot * tot / tc[a]
                            g = s_l * s_l / c_l + s_r * s_r / (tc[a] - c_l) - base
                            if g > bg[a]:
                                bg[a] = g
                                bf[a] = f
                                bt[a] = 0.5 * (pv[a] + val)
                    rs[a] += gv[r]
                    rc[a] += 1
                    pv[a] = val
            # split the winners, route rows to children
            n_nxt = 0
            for a in range(n_active):
                nd = act[a]
                if bf[a] < 0:
                    slot[nd] = -1
                    continue
                li = <int>n_nodes
                ri = <int>(n_nodes + 1)
                n_nodes += 2
                fv[nd] = bf[a]
                tv[nd] = bt[a]
                lv[nd] = li
                rv[nd] = ri
                nxtv[n_nxt] = li
                nxtv[n_nxt + 1] = ri
                n_nxt += 2
            for ii in range(m):
                nd = nrow[ii]
                if fv[nd] >= 0 and slot[nd] >= 0:
                    if xv[ii, fv[nd]] <= tv[nd]:
                        nrow[ii] = lv[nd]
                    else:
                        nrow[ii] = rv[nd]
            for a in range(n_active):
                slot[act[a]] = -1
            for a in range(n_nxt):
                act[a] = nxtv[a]
            n_active = n_nxt

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(), node_of_row)


def apply_tree(cnp.ndarray[cnp.int32_t, ndim=1] feature,
               cnp.ndarray[cnp.float64_t, ndim=1] threshold,
               cnp.ndarray[cnp.int32_t, ndim=1] left,
               cnp.ndarray[cnp.int32_t, ndim=1] right,
               cnp.ndarray[cnp.float64_t, ndim=2] x):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef int nd
    out = np.zeros(n, dtype=np.int32)
    cdef int[::1] o = out
    cdef int[::1] fv = feature
    cdef double[::1] tv = threshold
    cdef int[::1] lv = left
    cdef int[::1] rv = right
    cdef double[:, ::1] xv = x
    with nogil:
        for i in range(n):
            nd = 0
            while fv[nd] >= 0:
                if xv[i, fv[nd]] <= tv[nd]:
                    nd = lv[nd]
                else:
                    nd = rv[nd]
            o[i] = nd
    return out
