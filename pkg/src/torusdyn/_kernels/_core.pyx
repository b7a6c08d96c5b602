# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for orbit iteration (scalar loops, nogil).

Same step semantics as the pure backend; see pure.py for the layout.
"""

from libc.math cimport sin, cos, rint, fabs, INFINITY

import numpy as np

cimport numpy as cnp

cdef double TWO_PI = 6.283185307179586476925286766559
cdef double NEWTON_TOL = 1e-12
cdef int NEWTON_BUDGET = 100


cdef inline double trig_sum(const double[:, ::1] terms, Py_ssize_t lo, Py_ssize_t hi,
                            double x, double y) noexcept nogil:
    cdef double acc = 0.0, t, r
    cdef Py_ssize_t i
    for i in range(lo, hi):
        t = terms[i, 0] * x + terms[i, 1] * y
        r = TWO_PI * (t - rint(t))
        if terms[i, 2] != 0.0:
            acc += terms[i, 2] * sin(r)
        if terms[i, 3] != 0.0:
            acc += terms[i, 3] * cos(r)
    return acc


cdef inline void trig_sum_jac(const double[:, ::1] terms, Py_ssize_t lo, Py_ssize_t hi,
                              double x, double y, double* out) noexcept nogil:
    # out[0] = value, out[1] = d/dx, out[2] = d/dy
    cdef double t, r, s, c, d
    cdef Py_ssize_t i
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    for i in range(lo, hi):
        t = terms[i, 0] * x + terms[i, 1] * y
        r = TWO_PI * (t - rint(t))
        s = sin(r)
        c = cos(r)
        out[0] += terms[i, 2] * s + terms[i, 3] * c
        d = TWO_PI * (terms[i, 2] * c - terms[i, 3] * s)
        out[1] += terms[i, 0] * d
        out[2] += terms[i, 1] * d


cdef int apply_point(const long long[::1] kinds, const double[:, ::1] mats,
                     const double[:, ::1] trans,
                     const long long[::1] poff, const double[:, ::1] pterms,
                     const long long[::1] qoff, const double[:, ::1] qterms,
                     double* x, double* y) noexcept nogil:
    """Run the whole program on one point. Returns 0, or 1 on Newton failure."""
    cdef Py_ssize_t s, it
    cdef double xi, yi, zx, zy, rx, ry
    cdef double j11, j22, det
    cdef double p[3]
    cdef double q[3]
    cdef int ok
    for s in range(kinds.shape[0]):
        xi = x[0]
        yi = y[0]
        if kinds[s] == 0:
            x[0] = xi + trans[s, 0] + trig_sum(pterms, poff[s], poff[s + 1], xi, yi)
            y[0] = yi + trans[s, 1] + trig_sum(qterms, qoff[s], qoff[s + 1], xi, yi)
        elif kinds[s] == 1:
            x[0] = mats[s, 0] * xi + mats[s, 1] * yi + trans[s, 0]
            y[0] = mats[s, 2] * xi + mats[s, 3] * yi + trans[s, 1]
        else:
            zx = xi - trans[s, 0]
            zy = yi - trans[s, 1]
            ok = 0
            for it in range(NEWTON_BUDGET):
                trig_sum_jac(pterms, poff[s], poff[s + 1], zx, zy, p)
                trig_sum_jac(qterms, qoff[s], qoff[s + 1], zx, zy, q)
                rx = zx + trans[s, 0] + p[0] - xi
                ry = zy + trans[s, 1] + q[0] - yi
                if fabs(rx) < NEWTON_TOL and fabs(ry) < NEWTON_TOL:
                    ok = 1
                    break
                j11 = 1.0 + p[1]
                j22 = 1.0 + q[2]
                det = j11 * j22 - p[2] * q[1]
                zx -= (j22 * rx - p[2] * ry) / det
                zy -= (j11 * ry - q[1] * rx) / det
            if not ok:
                return 1
            x[0] = zx
            y[0] = zy
    return 0


def apply_program_packed(kinds, mats, trans, poff, pterms, qoff, qterms, x, y):
    cdef cnp.ndarray[double, ndim=1] xo = np.array(x, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] yo = np.array(y, dtype=np.float64, copy=True)
    cdef const long long[::1] kv = kinds
    cdef const double[:, ::1] mv = mats
    cdef const double[:, ::1] tv = trans
    cdef const long long[::1] pov = poff
    cdef const double[:, ::1] ptv = pterms
    cdef const long long[::1] qov = qoff
    cdef const double[:, ::1] qtv = qterms
    cdef double[::1] xv = xo
    cdef double[::1] yv = yo
    cdef Py_ssize_t i, npts = xo.shape[0]
    cdef int bad = 0
    with nogil:
        for i in range(npts):
            if apply_point(kv, mv, tv, pov, ptv, qov, qtv, &xv[i], &yv[i]):
                bad = 1
                break
    if bad:
        raise ArithmeticError(
            "inverse evaluation did not converge within %d Newton steps; "
            "the map may not be invertible" % NEWTON_BUDGET
        )
    return xo, yo


def run_orbits_packed(kinds, mats, trans, poff, pterms, qoff, qterms, x0, y0,
                      long long n, long long nmid):
    cdef cnp.ndarray[double, ndim=1] x = np.array(x0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] y = np.array(y0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] xm = x.copy()
    cdef cnp.ndarray[double, ndim=1] ym = y.copy()
    cdef const long long[::1] kv = kinds
    cdef const double[:, ::1] mv = mats
    cdef const double[:, ::1] tv = trans
    cdef const long long[::1] pov = poff
    cdef const double[:, ::1] ptv = pterms
    cdef const long long[::1] qov = qoff
    cdef const double[:, ::1] qtv = qterms
    cdef double[::1] xv = x
    cdef double[::1] yv = y
    cdef double[::1] xmv = xm
    cdef double[::1] ymv = ym
    cdef Py_ssize_t i, npts = x.shape[0]
    cdef long long k
    cdef double cx, cy, px, py, dx, dy
    cdef double dxmin = INFINITY, dxmax = -INFINITY
    cdef double dymin = INFINITY, dymax = -INFINITY
    cdef int bad = 0
    with nogil:
        for i in range(npts):
            cx = xv[i]
            cy = yv[i]
            for k in range(1, n + 1):
                px = cx
                py = cy
                if apply_point(kv, mv, tv, pov, ptv, qov, qtv, &cx, &cy):
                    bad = 1
                    break
                dx = cx - px
                dy = cy - py
                if dx < dxmin:
                    dxmin = dx
                if dx > dxmax:
                    dxmax = dx
                if dy < dymin:
                    dymin = dy
                if dy > dymax:
                    dymax = dy
                if k == nmid:
                    xmv[i] = cx
                    ymv[i] = cy
            if bad:
                break
            xv[i] = cx
            yv[i] = cy
    if bad:
        raise ArithmeticError(
            "inverse evaluation did not converge within %d Newton steps; "
            "the map may not be invertible" % NEWTON_BUDGET
        )
    return xm, ym, x, y, (dxmin, dxmax, dymin, dymax)
