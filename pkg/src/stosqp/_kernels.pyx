# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend for the symmetric-indefinite LDL^T kernels.

Same algorithm, conventions, and ipiv encoding as the pure-NumPy port
in ``stosqp._kernels_py``: unblocked Bunch-Kaufman with 1x1 / 2x2
pivoting on the lower triangle.  See that module's docstring for the
contract; this one exists to strip per-iteration Python overhead from
the driver's hot loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

cdef double PIVOT_ALPHA = (1.0 + sqrt(17.0)) / 8.0


def ldl_factor(a_in):
    a_arr = np.array(a_in, dtype=np.float64, order="C", copy=True)
    if a_arr.ndim != 2 or a_arr.shape[0] != a_arr.shape[1]:
        raise ValueError("ldl_factor needs a square matrix")
    cdef double[:, ::1] a = a_arr
    cdef Py_ssize_t n = a.shape[0]
    ipiv_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] ipiv = ipiv_arr
    cdef int info = 0
    cdef Py_ssize_t k = 0, i, j, imax, kk, kp, kstep
    cdef double absakk, colmax, rowmax, r1, d21, d11, d22, t, wk, wk1, tmp

    while k < n:
        kstep = 1
        absakk = fabs(a[k, k])
        if k < n - 1:
            imax = k + 1
            colmax = fabs(a[k + 1, k])
            for i in range(k + 2, n):
                t = fabs(a[i, k])
                if t > colmax:
                    colmax = t
                    imax = i
        else:
            imax = k
            colmax = 0.0
        if absakk == 0.0 and colmax == 0.0:
            if info == 0:
                info = <int>k + 1
            kp = k
        else:
            if absakk >= PIVOT_ALPHA * colmax:
                kp = k
            else:
                rowmax = 0.0
                for j in range(k, imax):
                    t = fabs(a[imax, j])
                    if t > rowmax:
                        rowmax = t
                if imax < n - 1:
                    for i in range(imax + 1, n):
                        t = fabs(a[i, imax])
                        if t > rowmax:
                            rowmax = t
                if absakk >= PIVOT_ALPHA * colmax * (colmax / rowmax):
                    kp = k
                elif fabs(a[imax, imax]) >= PIVOT_ALPHA * rowmax:
                    kp = imax
                else:
                    kp = imax
                    kstep = 2
            kk = k + kstep - 1
            if kp != kk:
                for i in range(kp + 1, n):
                    tmp = a[i, kk]
                    a[i, kk] = a[i, kp]
                    a[i, kp] = tmp
                for j in range(kk + 1, kp):
                    tmp = a[j, kk]
                    a[j, kk] = a[kp, j]
                    a[kp, j] = tmp
                tmp = a[kk, kk]
                a[kk, kk] = a[kp, kp]
                a[kp, kp] = tmp
                if kstep == 2:
                    tmp = a[k + 1, k]
                    a[k + 1, k] = a[kp, k]
                    a[kp, k] = tmp
            if kstep == 1:
                if k < n - 1:
                    r1 = 1.0 / a[k, k]
                    for j in range(k + 1, n):
                        t = r1 * a[j, k]
                        for i in range(j, n):
                            a[i, j] -= a[i, k] * t
                    for i in range(k + 1, n):
                        a[i, k] *= r1
            else:
                if k < n - 2:
                    d21 = a[k + 1, k]
                    d11 = a[k + 1, k + 1] / d21
                    d22 = a[k, k] / d21
                    t = 1.0 / (d11 * d22 - 1.0)
                    d21 = t / d21
                    for j in range(k + 2, n):
                        wk = d21 * (d11 * a[j, k] - a[j, k + 1])
                        wk1 = d21 * (d22 * a[j, k + 1] - a[j, k])
                        for i in range(j, n):
                            a[i, j] -= a[i, k] * wk + a[i, k + 1] * wk1
                        a[j, k] = wk
                        a[j, k + 1] = wk1
        if kstep == 1:
            ipiv[k] = kp + 1
        else:
            ipiv[k] = -(kp + 1)
            ipiv[k + 1] = -(kp + 1)
        k += kstep
    return a_arr, ipiv_arr, info


def ldl_solve(lf_in, ipiv_in, b_in):
    lf_arr = np.ascontiguousarray(lf_in, dtype=np.float64)
    ipiv_arr = np.ascontiguousarray(ipiv_in, dtype=np.int64)
    cdef Py_ssize_t n = lf_arr.shape[0]
    x_arr = np.array(b_in, dtype=np.float64, copy=True)
    vector = x_arr.ndim == 1
    if vector:
        x_arr = x_arr.reshape(n, 1)
    if x_arr.ndim != 2 or x_arr.shape[0] != n:
        raise ValueError("rhs shape does not match the factor")
    x_arr = np.ascontiguousarray(x_arr)
    cdef double[:, ::1] lf = lf_arr
    cdef double[:, ::1] x = x_arr
    cdef cnp.int64_t[::1] ipiv = ipiv_arr
    cdef Py_ssize_t nrhs = x.shape[1]
    cdef Py_ssize_t k, i, j, kp
    cdef cnp.int64_t piv
    cdef double akm1k, akm1, ak, denom, bkm1, bk, t, s

    # forward pass: x <- D^{-1} L^{-1} P b
    k = 0
    while k < n:
        piv = ipiv[k]
        if piv > 0:
            kp = piv - 1
            if kp != k:
                for j in range(nrhs):
                    t = x[k, j]
                    x[k, j] = x[kp, j]
                    x[kp, j] = t
            for i in range(k + 1, n):
                t = lf[i, k]
                for j in range(nrhs):
                    x[i, j] -= t * x[k, j]
            t = lf[k, k]
            for j in range(nrhs):
                x[k, j] /= t
            k += 1
        else:
            kp = -piv - 1
            if kp != k + 1:
                for j in range(nrhs):
                    t = x[k + 1, j]
                    x[k + 1, j] = x[kp, j]
                    x[kp, j] = t
            for i in range(k + 2, n):
                t = lf[i, k]
                s = lf[i, k + 1]
                for j in range(nrhs):
                    x[i, j] -= t * x[k, j]
                    x[i, j] -= s * x[k + 1, j]
            akm1k = lf[k + 1, k]
            akm1 = lf[k, k] / akm1k
            ak = lf[k + 1, k + 1] / akm1k
            denom = akm1 * ak - 1.0
            for j in range(nrhs):
                bkm1 = x[k, j] / akm1k
                bk = x[k + 1, j] / akm1k
                x[k, j] = (ak * bkm1 - bk) / denom
                x[k + 1, j] = (akm1 * bk - bkm1) / denom
            k += 2

    # backward pass: x <- P^T L^{-T} x
    k = n - 1
    while k >= 0:
        piv = ipiv[k]
        if piv > 0:
            for j in range(nrhs):
                s = 0.0
                for i in range(k + 1, n):
                    s += lf[i, k] * x[i, j]
                x[k, j] -= s
            kp = piv - 1
            if kp != k:
                for j in range(nrhs):
                    t = x[k, j]
                    x[k, j] = x[kp, j]
                    x[kp, j] = t
            k -= 1
        else:
            # second member of a 2x2 pair
            for j in range(nrhs):
                s = 0.0
                for i in range(k + 1, n):
                    s += lf[i, k] * x[i, j]
                x[k, j] -= s
                s = 0.0
                for i in range(k + 1, n):
                    s += lf[i, k - 1] * x[i, j]
                x[k - 1, j] -= s
            kp = -piv - 1
            if kp != k:
                for j in range(nrhs):
                    t = x[k, j]
                    x[k, j] = x[kp, j]
                    x[kp, j] = t
            k -= 2

    return x_arr[:, 0] if vector else x_arr
