# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Block-tridiagonal LU factorization and solve (block Thomas algorithm
with partially pivoted dense LU on the diagonal blocks)."""

import numpy as np

from libc.math cimport fabs

BACKEND = "cython"


class SingularBlockError(np.linalg.LinAlgError):
    pass


cdef int _lu_factor(double[:, ::1] a, int[::1] piv) noexcept nogil:
    """In-place Doolittle LU with partial pivoting.  Returns -1 if singular."""
    cdef int n = a.shape[0]
    cdef int i, j, k, p
    cdef double maxv, tmp
    for k in range(n):
        p = k
        maxv = fabs(a[k, k])
        for i in range(k + 1, n):
            if fabs(a[i, k]) > maxv:
                maxv = fabs(a[i, k])
                p = i
        piv[k] = p
        if maxv == 0.0 or maxv != maxv:
            return -1
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
        for i in range(k + 1, n):
            a[i, k] /= a[k, k]
            tmp = a[i, k]
            for j in range(k + 1, n):
                a[i, j] -= tmp * a[k, j]
    return 0


cdef void _lu_solve(double[:, ::1] a, int[::1] piv, double* b) noexcept nogil:
    cdef int n = a.shape[0]
    cdef int i, j, p
    cdef double tmp, s
    for i in range(n):
        p = piv[i]
        if p != i:
            tmp = b[i]; b[i] = b[p]; b[p] = tmp
    for i in range(n):
        s = b[i]
        for j in range(i):
            s -= a[i, j] * b[j]
        b[i] = s
    for i in range(n - 1, -1, -1):
        s = b[i]
        for j in range(i + 1, n):
            s -= a[i, j] * b[j]
        b[i] = s / a[i, i]


def factor(lower, diag, upper):
    """Factor a block-tridiagonal matrix.

    lower: (N-1, nv, nv) sub-diagonal blocks, diag: (N, nv, nv),
    upper: (N-1, nv, nv).  Returns an opaque factor object for solve().
    """
    cdef double[:, :, ::1] dv = np.array(diag, dtype=np.float64, copy=True, order="C")
    cdef int N = dv.shape[0], nv = dv.shape[1]
    cmat_np = (np.array(upper, dtype=np.float64, copy=True, order="C")
               if N > 1 else np.zeros((0, nv, nv)))
    lower_np = (np.array(lower, dtype=np.float64, copy=False, order="C")
                if N > 1 else np.zeros((0, nv, nv)))
    piv_np = np.zeros((N, nv), dtype=np.int32)
    cdef double[:, :, ::1] cv = cmat_np
    cdef double[:, :, ::1] lv = lower_np
    cdef int[:, ::1] pv = piv_np
    buf_np = np.zeros(nv, dtype=np.float64)
    cdef double[::1] buf = buf_np
    cdef int i, r, col, k, bad = -1
    cdef double s
    with nogil:
        for i in range(N):
            if _lu_factor(dv[i], pv[i]) != 0:
                bad = i
                break
            if i < N - 1:
                for col in range(nv):
                    for r in range(nv):
                        buf[r] = cv[i, r, col]
                    _lu_solve(dv[i], pv[i], &buf[0])
                    for r in range(nv):
                        cv[i, r, col] = buf[r]
                for r in range(nv):
                    for col in range(nv):
                        s = 0.0
                        for k in range(nv):
                            s += lv[i, r, k] * cv[i, k, col]
                        dv[i + 1, r, col] -= s
    if bad >= 0:
        raise SingularBlockError(f"singular diagonal block {bad}")
    return ("cy", np.asarray(dv), piv_np, cmat_np, lower_np)


def solve(factors, rhs):
    """Solve A x = rhs given factors from factor(); rhs has shape (N, nv)."""
    tag, d_np, piv_np, cmat_np, lower_np = factors
    y_np = np.array(rhs, dtype=np.float64, copy=True, order="C")
    cdef double[:, :, ::1] dv = d_np
    cdef double[:, :, ::1] cv = cmat_np
    cdef double[:, :, ::1] lv = lower_np
    cdef int[:, ::1] pv = piv_np
    cdef double[:, ::1] y = y_np
    cdef int N = dv.shape[0], nv = dv.shape[1]
    cdef int i, r, k
    cdef double s
    with nogil:
        for i in range(N):
            if i > 0:
                for r in range(nv):
                    s = 0.0
                    for k in range(nv):
                        s += lv[i - 1, r, k] * y[i - 1, k]
                    y[i, r] -= s
            _lu_solve(dv[i], pv[i], &y[i, 0])
        for i in range(N - 2, -1, -1):
            for r in range(nv):
                s = 0.0
                for k in range(nv):
                    s += cv[i, r, k] * y[i + 1, k]
                y[i, r] -= s
    return y_np
