# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Semantics (and arithmetic, operation for operation) mirror
``mcfsing._fallback``; keep the two in lockstep.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

STATUS_TIME = 0
STATUS_PINCH = 1
STATUS_EXTINCT = 2
STATUS_MAXSTEPS = 3
STATUS_EMIT = 4


def greedy_cover(xs, ts, double r):
    """See _fallback.greedy_cover."""
    cdef double[:, ::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] T = np.ascontiguousarray(ts, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef double r2 = r * r
    cdef cnp.uint8_t[::1] covered = np.zeros(n, dtype=np.uint8)
    cdef list centers = []
    cdef Py_ssize_t i, j, m
    cdef double dx2, diff, dtv
    for i in range(n):
        if covered[i]:
            continue
        centers.append(i)
        for j in range(n):
            if covered[j]:
                continue
            dtv = fabs(T[j] - T[i])
            if dtv > r2:
                continue
            dx2 = 0.0
            for m in range(d):
                diff = X[j, m] - X[i, m]
                dx2 += diff * diff
                if dx2 > r2:
                    break
            if dx2 <= r2:
                covered[j] = 1
    return np.asarray(centers, dtype=np.int64)


cdef inline Py_ssize_t _bisect_left(double[::1] edges, double key,
                                    Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if edges[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def pairwise_bin_max(xs, ts, edges, bint spatial_key=False):
    """See _fallback.pairwise_bin_max."""
    cdef double[:, ::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] T = np.ascontiguousarray(ts, dtype=np.float64)
    cdef double[::1] E = np.ascontiguousarray(edges, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t nbins = E.shape[0]
    binmax_arr = np.full(nbins, -1.0)
    bininf_arr = np.zeros(nbins, dtype=np.uint8)
    cdef double[::1] binmax = binmax_arr
    cdef cnp.uint8_t[::1] bininf = bininf_arr
    cdef Py_ssize_t i, j, m, b
    cdef double dx2, diff, dtv, key, ratio
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                dx2 = 0.0
                for m in range(d):
                    diff = X[j, m] - X[i, m]
                    dx2 += diff * diff
                dtv = fabs(T[j] - T[i])
                if spatial_key:
                    key = sqrt(dx2)
                else:
                    key = sqrt(dx2)
                    if sqrt(dtv) > key:
                        key = sqrt(dtv)
                b = _bisect_left(E, key, nbins)
                if b >= nbins:
                    continue
                if dx2 == 0.0:
                    if dtv > 0.0:
                        bininf[b] = 1
                else:
                    ratio = dtv / dx2
                    if ratio > binmax[b]:
                        binmax[b] = ratio
    return binmax_arr, bininf_arr.astype(bool)


def rotsym_step_block(v_arr, double h, double x0, double nrot, double t,
                      double t_stop, Py_ssize_t iL, Py_ssize_t iR,
                      double xL, double xR, bint periodic, double vmin_stop,
                      double cfl, long max_steps, double vemit_lo=0.0,
                      double vemit_hi=0.0):
    """See _fallback.rotsym_step_block."""
    cdef double[::1] v = v_arr
    cdef Py_ssize_t M = v.shape[0]
    vx_arr = np.empty(M)
    vxx_arr = np.empty(M)
    cdef double[::1] vx = vx_arr
    cdef double[::1] vxx = vxx_arr
    cdef double n = nrot + 1.0
    cdef Py_ssize_t pinch_idx = -1
    cdef long steps = 0
    cdef Py_ssize_t i, na, k, im, ip
    cdef double aL, aR, a, b, vint_min, dt, denom, rhs, vmax, w, val
    cdef int status = STATUS_MAXSTEPS
    cdef bint moved

    while steps < max_steps:
        if t >= t_stop - 1e-15:
            return t, iL, iR, xL, xR, STATUS_TIME, steps, pinch_idx
        if periodic:
            vint_min = v[0]
            for i in range(M):
                im = i - 1 if i > 0 else M - 1
                ip = i + 1 if i < M - 1 else 0
                vx[i] = (v[ip] - v[im]) / (2.0 * h)
                vxx[i] = (v[ip] - 2.0 * v[i] + v[im]) / (h * h)
                if v[i] < vint_min:
                    vint_min = v[i]
        else:
            if iR - iL + 1 < 3 or (xR - xL) <= 2.2 * h:
                return t, iL, iR, xL, xR, STATUS_EXTINCT, steps, pinch_idx
            aL = (x0 + iL * h) - xL
            if aL < 1e-12 * h:
                aL = 1e-12 * h
            aR = xR - (x0 + iR * h)
            if aR < 1e-12 * h:
                aR = 1e-12 * h
            for i in range(iL + 1, iR):
                vx[i] = (v[i + 1] - v[i - 1]) / (2.0 * h)
                vxx[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h)
            a = aL
            b = h
            vx[iL] = (a * a * v[iL + 1] + (b * b - a * a) * v[iL]) \
                / (a * b * (a + b))
            vxx[iL] = 2.0 * (a * v[iL + 1] - (a + b) * v[iL]) \
                / (a * b * (a + b))
            a = aR
            vx[iR] = -(a * a * v[iR - 1] + (b * b - a * a) * v[iR]) \
                / (a * b * (a + b))
            vxx[iR] = 2.0 * (a * v[iR - 1] - (a + b) * v[iR]) \
                / (a * b * (a + b))
            if iR - 2 >= iL + 2:
                vint_min = v[iL + 2]
                for i in range(iL + 2, iR - 1):
                    if v[i] < vint_min:
                        vint_min = v[i]
            else:
                vint_min = v[iL]
                for i in range(iL, iR + 1):
                    if v[i] > vint_min:
                        vint_min = v[i]
        dt = cfl * h * h
        val = vint_min / (20.0 * n)
        if val < 0.01 * vmin_stop:
            val = 0.01 * vmin_stop
        if val < dt:
            dt = val
        if t_stop - t < dt:
            dt = t_stop - t
        if periodic:
            for i in range(M):
                denom = 4.0 * v[i] + vx[i] * vx[i]
                rhs = (4.0 * v[i] * vxx[i] - 2.0 * vx[i] * vx[i]) / denom \
                    - 2.0 * nrot
                v[i] = v[i] + dt * rhs
        else:
            for i in range(iL, iR + 1):
                denom = 4.0 * v[i] + vx[i] * vx[i]
                rhs = (4.0 * v[i] * vxx[i] - 2.0 * vx[i] * vx[i]) / denom \
                    - 2.0 * nrot
                v[i] = v[i] + dt * rhs
        t += dt
        steps += 1
        if not periodic:
            moved = False
            while iL <= iR and v[iL] <= 0.0:
                iL += 1
                moved = True
            if iL > iR:
                return t, iL, iR, xL, xR, STATUS_EXTINCT, steps, pinch_idx
            if moved:
                xL = (x0 + iL * h) - h * v[iL] / (v[iL] - v[iL - 1])
            else:
                xL += dt * 2.0 * n * ((x0 + iL * h) - xL) / v[iL]
                if xL > (x0 + iL * h) - 1e-9 * h:
                    xL = (x0 + iL * h) - 1e-9 * h
            moved = False
            while iR >= iL and v[iR] <= 0.0:
                iR -= 1
                moved = True
            if iR < iL:
                return t, iL, iR, xL, xR, STATUS_EXTINCT, steps, pinch_idx
            if moved:
                xR = (x0 + iR * h) + h * v[iR] / (v[iR] - v[iR + 1])
            else:
                xR += dt * 2.0 * n * ((x0 + iR * h) - xR) / v[iR]
                if xR < (x0 + iR * h) + 1e-9 * h:
                    xR = (x0 + iR * h) + 1e-9 * h
            if iR - 2 >= iL + 2:
                k = iL + 2
                for i in range(iL + 2, iR - 1):
                    if v[i] < v[k]:
                        k = i
                if v[k] <= vmin_stop:
                    pinch_idx = k
                    return t, iL, iR, xL, xR, STATUS_PINCH, steps, pinch_idx
                if vemit_lo > 0.0 and v[k] <= vemit_lo:
                    return t, iL, iR, xL, xR, STATUS_EMIT, steps, pinch_idx
            vmax = v[iL]
            for i in range(iL, iR + 1):
                if v[i] > vmax:
                    vmax = v[i]
            if vmax <= vmin_stop:
                return t, iL, iR, xL, xR, STATUS_EXTINCT, steps, pinch_idx
            if vemit_hi > 0.0 and vmax <= vemit_hi:
                return t, iL, iR, xL, xR, STATUS_EMIT, steps, pinch_idx
        else:
            k = 0
            for i in range(M):
                if v[i] < v[k]:
                    k = i
            if v[k] <= vmin_stop:
                pinch_idx = k
                return t, iL, iR, xL, xR, STATUS_PINCH, steps, pinch_idx
            if vemit_lo > 0.0 and v[k] <= vemit_lo:
                return t, iL, iR, xL, xR, STATUS_EMIT, steps, pinch_idx
    return t, iL, iR, xL, xR, STATUS_MAXSTEPS, steps, pinch_idx
