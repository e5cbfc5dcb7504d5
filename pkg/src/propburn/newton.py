"""Damped modified Newton iteration on block-tridiagonal systems.

The nonlinear residual couples each mesh row only to its immediate
neighbors, so the Jacobian is block tridiagonal.  It is estimated by
grouped finite differences (3*nv residual evaluations regardless of the
number of rows) and its factorization is cached and reused across stages
and time steps until it goes stale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


class NewtonError(RuntimeError):
    """Newton iteration failed to converge."""


@dataclass
class NewtonOptions:
    tol: float = 1e-8              # scaled full-step norm for convergence
    max_iters: int = 24            # iterations per Jacobian before refresh
    max_jacobian_evals: int = 5
    min_damping: float = 1.0 / 64.0
    stale_iters: int = 8           # iterations beyond which the Jacobian is
                                   # considered stale for the next solve


@dataclass
class JacobianCache:
    """Cached factorized Jacobian, shared between stages and steps."""
    factors: object | None = None
    n_evals_total: int = 0
    # value of (a_ii * dt) the Jacobian was built with, for staleness checks
    coeff: float | None = None

    def invalidate(self):
        self.factors = None
        self.coeff = None

    def is_stale_for(self, coeff, rtol=0.1):
        if self.factors is None:
            return True
        if coeff is None or self.coeff is None:
            return False
        return abs(coeff - self.coeff) > rtol * abs(self.coeff)


def scaled_norm(dx, scales):
    """RMS of dx measured in units of per-component typical scales."""
    r = np.asarray(dx) / scales
    return float(np.sqrt(np.mean(r * r)))


def fd_jacobian(residual, x, scales, f0=None):
    """Block-tridiagonal Jacobian of residual(x) by grouped finite differences.

    x and residual(x) have shape (N, nv).  Rows are perturbed three apart so
    each group of perturbations touches disjoint sets of residual rows; the
    cost is 3*nv residual evaluations.  Returns an array (N, 3, nv, nv) where
    block 0 couples row i to row i-1, block 1 is the diagonal, block 2
    couples to row i+1.
    """
    x = np.asarray(x, dtype=float)
    N, nv = x.shape
    scales = np.broadcast_to(np.asarray(scales, dtype=float), (nv,))
    if f0 is None:
        f0 = residual(x)
    f0 = np.asarray(f0, dtype=float)
    J = np.zeros((N, 3, nv, nv))
    for group in range(min(3, N)):
        rows = np.arange(group, N, 3)
        for v in range(nv):
            eps = SQRT_EPS * np.maximum(np.abs(x[rows, v]), scales[v])
            xp = x.copy()
            xp[rows, v] += eps
            df = (np.asarray(residual(xp)) - f0)
            for i, e in zip(rows, eps):
                J[i, 1, :, v] += df[i] / e
                if i > 0:
                    J[i - 1, 2, :, v] += df[i - 1] / e
                if i < N - 1:
                    J[i + 1, 0, :, v] += df[i + 1] / e
    return J


def factor_jacobian(J):
    """Factor a Jacobian in (N, 3, nv, nv) layout."""
    lower = np.ascontiguousarray(J[1:, 0])
    diag = np.ascontiguousarray(J[:, 1])
    upper = np.ascontiguousarray(J[:-1, 2])
    return kernels.factor(lower, diag, upper)


def solve_block_tridiagonal(J, rhs):
    """One-shot linear solve with a Jacobian in (N, 3, nv, nv) layout."""
    return kernels.solve(factor_jacobian(J), rhs)


def newton_solve(residual, x0, scales, options=None, cache=None, coeff=None):
    """Solve residual(x) = 0 by damped modified Newton iteration.

    x0: (N, nv) initial guess; scales: per-component typical magnitudes.
    cache: optional JacobianCache reused across calls; coeff: the implicit
    coefficient (a_ii * dt) the Jacobian depends on, used for staleness
    detection when the step size changes.

    Returns (x, info) where info has keys converged, iterations,
    jacobian_evals, step_norm.  Raises NewtonError when the iteration fails
    within the Jacobian-evaluation budget.
    """
    opts = options or NewtonOptions()
    own_cache = cache if cache is not None else JacobianCache()
    x = np.array(x0, dtype=float, copy=True)
    N, nv = x.shape
    scales = np.broadcast_to(np.asarray(scales, dtype=float), (nv,))
    info = {"converged": False, "iterations": 0, "jacobian_evals": 0,
            "step_norm": np.inf}

    if own_cache.is_stale_for(coeff):
        own_cache.invalidate()

    for _ in range(opts.max_jacobian_evals):
        if own_cache.factors is None:
            try:
                f0 = np.asarray(residual(x))
            except (FloatingPointError, ValueError) as exc:
                raise NewtonError(f"residual evaluation failed: {exc}") from exc
            J = fd_jacobian(residual, x, scales, f0=f0)
            try:
                own_cache.factors = factor_jacobian(J)
            except kernels.SingularBlockError as exc:
                raise NewtonError(f"singular Jacobian: {exc}") from exc
            own_cache.coeff = coeff
            own_cache.n_evals_total += 1
            info["jacobian_evals"] += 1

        tau = 1.0
        prev_norm = None
        stale = False
        for it in range(opts.max_iters):
            info["iterations"] += 1
            try:
                f = np.asarray(residual(x))
            except (FloatingPointError, ValueError):
                stale = True
                break
            if not np.all(np.isfinite(f)):
                stale = True
                break
            dx = -kernels.solve(own_cache.factors, f)
            norm = scaled_norm(dx, scales)
            info["step_norm"] = norm
            if not np.isfinite(norm):
                stale = True
                break
            if norm <= opts.tol:
                x += dx
                info["converged"] = True
                if it + 1 > opts.stale_iters:
                    own_cache.invalidate()
                return x, info
            # halve the damping while the step norm is not decreasing
            if prev_norm is not None and norm >= prev_norm:
                tau *= 0.5
                if tau < opts.min_damping:
                    stale = True
                    break
            else:
                tau = min(1.0, 2.0 * tau)
            x += tau * dx
            prev_norm = norm
        else:
            stale = True
        if stale:
            own_cache.invalidate()
            continue
    raise NewtonError(
        f"no convergence after {info['jacobian_evals']} Jacobian evaluations "
        f"(last scaled step norm {info['step_norm']:.3e})")
