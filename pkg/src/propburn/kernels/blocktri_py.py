"""Block-tridiagonal LU factorization and solve, pure-NumPy reference
implementation.  Same interface as the compiled extension module."""

from __future__ import annotations

import numpy as np
import scipy.linalg

BACKEND = "python"


class SingularBlockError(np.linalg.LinAlgError):
    pass


def factor(lower, diag, upper):
    """Factor a block-tridiagonal matrix by block Thomas elimination.

    lower: (N-1, nv, nv) sub-diagonal blocks (block i couples row i+1 to i),
    diag:  (N, nv, nv) diagonal blocks,
    upper: (N-1, nv, nv) super-diagonal blocks.
    Returns an opaque factor object for use with solve().
    """
    diag = np.asarray(diag, dtype=float)
    N, nv = diag.shape[0], diag.shape[1]
    lu = []
    cmat = np.array(upper, dtype=float, copy=True) if N > 1 else np.zeros((0, nv, nv))
    d = diag.copy()
    try:
        for i in range(N):
            fac = scipy.linalg.lu_factor(d[i], check_finite=False)
            lu.append(fac)
            if i < N - 1:
                cmat[i] = scipy.linalg.lu_solve(fac, cmat[i], check_finite=False)
                d[i + 1] = d[i + 1] - lower[i] @ cmat[i]
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularBlockError(f"singular diagonal block {i}") from exc
    for i in range(N):
        if not np.all(np.isfinite(lu[i][0])) or np.any(np.diag(lu[i][0]) == 0.0):
            raise SingularBlockError(f"singular diagonal block {i}")
    return ("py", lu, cmat, np.asarray(lower, dtype=float))


def solve(factors, rhs):
    """Solve A x = rhs given factors from factor(); rhs has shape (N, nv)."""
    tag, lu, cmat, lower = factors
    y = np.array(rhs, dtype=float, copy=True)
    N = len(lu)
    for i in range(N):
        if i > 0:
            y[i] -= lower[i - 1] @ y[i - 1]
        y[i] = scipy.linalg.lu_solve(lu[i], y[i], check_finite=False)
    for i in range(N - 2, -1, -1):
        y[i] -= cmat[i] @ y[i + 1]
    return y
