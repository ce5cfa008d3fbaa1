"""Pure-NumPy backend for the symmetric-indefinite LDL^T kernels.

Unblocked Bunch-Kaufman factorization with 1x1 / 2x2 diagonal pivoting
on the lower triangle, following the classic unblocked reference
routines for symmetric indefinite matrices.  The compiled backend in
``stosqp._kernels`` implements the identical algorithm in C loops;
``stosqp.backend`` selects between them at import time.

Conventions shared by both backends:

* ``ldl_factor(a)`` leaves ``a`` untouched and returns ``(lf, ipiv,
  info)``.  ``lf`` holds the packed factor in its lower triangle
  (unit-lower multipliers below the D blocks, D entries on and just
  below the diagonal).  ``ipiv`` uses the 1-based encoding of the
  reference routines: a positive entry ``p`` at position ``k`` means a
  1x1 pivot with rows/columns ``k`` and ``p-1`` interchanged; the
  negative entry ``-p`` stored at both members of a pair marks a 2x2
  pivot with rows/columns ``k+1`` and ``p-1`` interchanged.  ``info``
  is 0 on success, or ``1 + k`` for the first column ``k`` whose pivot
  candidates were all exactly zero.
* ``ldl_solve(lf, ipiv, b)`` accepts a single RHS vector or a matrix
  whose columns are RHS vectors and returns a fresh array of the same
  shape.  Behavior is undefined when ``info`` was nonzero.
"""

import math

import numpy as np

# Threshold balancing element growth between 1x1 and 2x2 pivots.
PIVOT_ALPHA = (1.0 + math.sqrt(17.0)) / 8.0


def ldl_factor(a):
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("ldl_factor needs a square matrix")
    n = a.shape[0]
    ipiv = np.zeros(n, dtype=np.int64)
    info = 0
    k = 0
    while k < n:
        kstep = 1
        absakk = abs(a[k, k])
        if k < n - 1:
            imax = k + 1 + int(np.argmax(np.abs(a[k + 1 :, k])))
            colmax = abs(a[imax, k])
        else:
            imax = k
            colmax = 0.0
        if max(absakk, colmax) == 0.0:
            # column of zeros: leave it, report the first occurrence
            if info == 0:
                info = k + 1
            kp = k
        else:
            if absakk >= PIVOT_ALPHA * colmax:
                kp = k
            else:
                # largest off-diagonal magnitude in row/column imax
                rowmax = float(np.max(np.abs(a[imax, k:imax])))
                if imax < n - 1:
                    rowmax = max(rowmax, float(np.max(np.abs(a[imax + 1 :, imax]))))
                if absakk >= PIVOT_ALPHA * colmax * (colmax / rowmax):
                    kp = k
                elif abs(a[imax, imax]) >= PIVOT_ALPHA * rowmax:
                    kp = imax
                else:
                    kp = imax
                    kstep = 2
            kk = k + kstep - 1
            if kp != kk:
                # interchange rows and columns kk and kp in the
                # trailing submatrix, touching the lower triangle only
                if kp < n - 1:
                    a[kp + 1 :, [kk, kp]] = a[kp + 1 :, [kp, kk]]
                tmp = a[kk + 1 : kp, kk].copy()
                a[kk + 1 : kp, kk] = a[kp, kk + 1 : kp]
                a[kp, kk + 1 : kp] = tmp
                a[kk, kk], a[kp, kp] = a[kp, kp], a[kk, kk]
                if kstep == 2:
                    a[k + 1, k], a[kp, k] = a[kp, k], a[k + 1, k]
            if kstep == 1:
                if k < n - 1:
                    r1 = 1.0 / a[k, k]
                    col = a[k + 1 :, k]
                    a[k + 1 :, k + 1 :] -= r1 * np.outer(col, col)
                    col *= r1
            else:
                if k < n - 2:
                    # rank-2 update written so the stored multipliers
                    # solve against the 2x2 D block exactly as the
                    # reference routine does
                    d21 = a[k + 1, k]
                    d11 = a[k + 1, k + 1] / d21
                    d22 = a[k, k] / d21
                    t = 1.0 / (d11 * d22 - 1.0)
                    d21 = t / d21
                    colk = a[k + 2 :, k].copy()
                    colk1 = a[k + 2 :, k + 1].copy()
                    wk = d21 * (d11 * colk - colk1)
                    wk1 = d21 * (d22 * colk1 - colk)
                    a[k + 2 :, k + 2 :] -= np.outer(colk, wk) + np.outer(colk1, wk1)
                    a[k + 2 :, k] = wk
                    a[k + 2 :, k + 1] = wk1
        if kstep == 1:
            ipiv[k] = kp + 1
        else:
            ipiv[k] = -(kp + 1)
            ipiv[k + 1] = -(kp + 1)
        k += kstep
    return a, ipiv, info


def ldl_solve(lf, ipiv, b):
    lf = np.asarray(lf, dtype=np.float64)
    n = lf.shape[0]
    x = np.array(b, dtype=np.float64, copy=True)
    vector = x.ndim == 1
    if vector:
        x = x.reshape(n, 1)
    if x.ndim != 2 or x.shape[0] != n:
        raise ValueError("rhs shape does not match the factor")

    # forward pass: x <- D^{-1} L^{-1} P b
    k = 0
    while k < n:
        piv = int(ipiv[k])
        if piv > 0:
            kp = piv - 1
            if kp != k:
                x[[k, kp]] = x[[kp, k]]
            if k < n - 1:
                x[k + 1 :] -= np.outer(lf[k + 1 :, k], x[k])
            x[k] /= lf[k, k]
            k += 1
        else:
            kp = -piv - 1
            if kp != k + 1:
                x[[k + 1, kp]] = x[[kp, k + 1]]
            if k < n - 2:
                x[k + 2 :] -= np.outer(lf[k + 2 :, k], x[k])
                x[k + 2 :] -= np.outer(lf[k + 2 :, k + 1], x[k + 1])
            akm1k = lf[k + 1, k]
            akm1 = lf[k, k] / akm1k
            ak = lf[k + 1, k + 1] / akm1k
            denom = akm1 * ak - 1.0
            bkm1 = x[k] / akm1k
            bk = x[k + 1] / akm1k
            x[k] = (ak * bkm1 - bk) / denom
            x[k + 1] = (akm1 * bk - bkm1) / denom
            k += 2

    # backward pass: x <- P^T L^{-T} x
    k = n - 1
    while k >= 0:
        piv = int(ipiv[k])
        if piv > 0:
            if k < n - 1:
                x[k] -= lf[k + 1 :, k] @ x[k + 1 :]
            kp = piv - 1
            if kp != k:
                x[[k, kp]] = x[[kp, k]]
            k -= 1
        else:
            # second member of a 2x2 pair
            if k < n - 1:
                x[k] -= lf[k + 1 :, k] @ x[k + 1 :]
                x[k - 1] -= lf[k + 1 :, k - 1] @ x[k + 1 :]
            kp = -piv - 1
            if kp != k:
                x[[k, kp]] = x[[kp, k]]
            k -= 2

    return x[:, 0] if vector else x
