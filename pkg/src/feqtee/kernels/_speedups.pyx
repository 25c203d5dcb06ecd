# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (cyclic DTW, edge weights).

Must agree with kernels.pure to float tolerance; the dispatch in
kernels/__init__.py prefers this module when it imports."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "compiled"


cdef inline double _dmin3(double a, double b, double c) nogil:
    cdef double m = a
    if b < m:
        m = b
    if c < m:
        m = c
    return m


def dtw_table(a, b):
    """Classic DTW with Euclidean point cost and symmetric steps."""
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] prev = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cur = np.empty(m)
    cdef double[::1] p = prev, c = cur
    cdef Py_ssize_t i, j
    cdef double dx, dy, cost

    dx = A[0, 0] - B[0, 0]
    dy = A[0, 1] - B[0, 1]
    p[0] = sqrt(dx * dx + dy * dy)
    for j in range(1, m):
        dx = A[0, 0] - B[j, 0]
        dy = A[0, 1] - B[j, 1]
        p[j] = p[j - 1] + sqrt(dx * dx + dy * dy)
    for i in range(1, n):
        dx = A[i, 0] - B[0, 0]
        dy = A[i, 1] - B[0, 1]
        c[0] = p[0] + sqrt(dx * dx + dy * dy)
        for j in range(1, m):
            dx = A[i, 0] - B[j, 0]
            dy = A[i, 1] - B[j, 1]
            cost = sqrt(dx * dx + dy * dy)
            c[j] = cost + _dmin3(p[j], p[j - 1], c[j - 1])
        p, c = c, p
    return float(p[m - 1])


def dtw_cyclic(a, b):
    """Min DTW over all rotations of `a`."""
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0]
    if n == 0 or m == 0:
        raise ValueError("empty sequence")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cost_arr = np.empty((n, m))
    cdef double[:, ::1] cost = cost_arr
    cdef Py_ssize_t i, j, r, ii
    cdef double dx, dy, best, total
    for i in range(n):
        for j in range(m):
            dx = A[i, 0] - B[j, 0]
            dy = A[i, 1] - B[j, 1]
            cost[i, j] = sqrt(dx * dx + dy * dy)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] prev = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cur = np.empty(m)
    cdef double[::1] p = prev, c = cur
    best = np.inf
    for r in range(n):
        ii = r
        p[0] = cost[ii, 0]
        for j in range(1, m):
            p[j] = p[j - 1] + cost[ii, j]
        for i in range(1, n):
            ii = (r + i) % n
            c[0] = p[0] + cost[ii, 0]
            for j in range(1, m):
                c[j] = cost[ii, j] + _dmin3(p[j], p[j - 1], c[j - 1])
            p, c = c, p
        if p[m - 1] < best:
            best = p[m - 1]
    return float(best)


cdef inline double _pt_seg_d2(double px, double py, double ax, double ay,
                              double bx, double by) nogil:
    cdef double dx = bx - ax, dy = by - ay
    cdef double L2 = dx * dx + dy * dy
    cdef double t, qx, qy
    if L2 <= 0.0:
        qx = ax
        qy = ay
    else:
        t = ((px - ax) * dx + (py - ay) * dy) / L2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        qx = ax + t * dx
        qy = ay + t * dy
    dx = px - qx
    dy = py - qy
    return dx * dx + dy * dy


cdef inline double _cross(double ox, double oy, double px, double py,
                          double qx, double qy) nogil:
    return (px - ox) * (qy - oy) - (py - oy) * (qx - ox)


cdef inline double _seg_seg_dist(double a0x, double a0y, double a1x,
                                 double a1y, double b0x, double b0y,
                                 double b1x, double b1y) nogil:
    cdef double d1 = _cross(b0x, b0y, b1x, b1y, a0x, a0y)
    cdef double d2 = _cross(b0x, b0y, b1x, b1y, a1x, a1y)
    cdef double d3 = _cross(a0x, a0y, a1x, a1y, b0x, b0y)
    cdef double d4 = _cross(a0x, a0y, a1x, a1y, b1x, b1y)
    if d1 * d2 < 0.0 and d3 * d4 < 0.0:
        return 0.0
    cdef double m = _pt_seg_d2(a0x, a0y, b0x, b0y, b1x, b1y)
    cdef double v = _pt_seg_d2(a1x, a1y, b0x, b0y, b1x, b1y)
    if v < m:
        m = v
    v = _pt_seg_d2(b0x, b0y, a0x, a0y, a1x, a1y)
    if v < m:
        m = v
    v = _pt_seg_d2(b1x, b1y, a0x, a0y, a1x, a1y)
    if v < m:
        m = v
    return sqrt(m)


def edge_weights(edges, loop, int k):
    """Flux-style weights; see kernels.pure.edge_weights for the formula."""
    cdef double[:, :, ::1] E = np.ascontiguousarray(edges, dtype=np.float64)
    cdef double[:, ::1] L = np.ascontiguousarray(loop, dtype=np.float64)
    cdef Py_ssize_t ne = E.shape[0], ns = L.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(ne)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, kk, s, nearest
    cdef double ax, ay, bx, by, ex, ey, elen, ehx, ehy
    cdef double t, px, py, d2, bestd2, s0x, s0y, s1x, s1y
    cdef double segx, segy, seglen, nx, ny, dot, D, w

    for e in range(ne):
        ax = E[e, 0, 0]
        ay = E[e, 0, 1]
        bx = E[e, 1, 0]
        by = E[e, 1, 1]
        ex = bx - ax
        ey = by - ay
        elen = sqrt(ex * ex + ey * ey)
        if elen == 0.0:
            raise ValueError("zero-length edge")
        ehx = ex / elen
        ehy = ey / elen
        w = 0.0
        for kk in range(k):
            t = (kk + 1.0) / (k + 1.0)
            px = ax + t * ex
            py = ay + t * ey
            bestd2 = np.inf
            nearest = 0
            for s in range(ns):
                s0x = L[s, 0]
                s0y = L[s, 1]
                s1x = L[(s + 1) % ns, 0]
                s1y = L[(s + 1) % ns, 1]
                d2 = _pt_seg_d2(px, py, s0x, s0y, s1x, s1y)
                if d2 < bestd2:
                    bestd2 = d2
                    nearest = s
            s0x = L[nearest, 0]
            s0y = L[nearest, 1]
            s1x = L[(nearest + 1) % ns, 0]
            s1y = L[(nearest + 1) % ns, 1]
            segx = s1x - s0x
            segy = s1y - s0y
            seglen = sqrt(segx * segx + segy * segy)
            if seglen > 0.0:
                nx = -segy / seglen
                ny = segx / seglen
                dot = fabs(ehx * nx + ehy * ny)
            else:
                dot = 0.0
            D = _seg_seg_dist(ax, ay, bx, by, s0x, s0y, s1x, s1y)
            w += dot + D * D
        out[e] = w
    return out_arr
