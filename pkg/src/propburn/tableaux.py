"""Butcher tableaux of the supported implicit Runge-Kutta methods.

All production methods are stiffly accurate (last row of A equals b), so
the final stage is the step solution and the algebraic constraints of a
semi-explicit DAE hold exactly at step ends.  The ESDIRK methods carry an
embedded lower-order weight vector that coincides with an interior stage,
which makes the embedded solution available for the algebraic variables
as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TableauError(ValueError):
    pass


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    b_hat: np.ndarray | None = None
    embedded_order: int | None = None
    l_stable: bool = True
    # methods without an annihilating stiffly accurate structure for the
    # constraints reflect the algebraic residual instead (g_new = -g_old)
    reflect_constraints: bool = False

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        if self.b_hat is not None:
            object.__setattr__(self, "b_hat", np.asarray(self.b_hat, dtype=float))

    @property
    def n_stages(self):
        return len(self.b)

    @property
    def first_stage_explicit(self):
        return self.A[0, 0] == 0.0

    @property
    def stiffly_accurate(self):
        return bool(np.allclose(self.A[-1], self.b, atol=1e-13))

    @property
    def gamma(self):
        start = 1 if self.first_stage_explicit else 0
        return float(self.A[start, start])

    @property
    def embedded_stage(self):
        """Index of the stage whose A-row equals b_hat, if any.

        At such a stage the embedded solution coincides with the stage
        state, so an embedded value exists for the algebraic variables too.
        """
        if self.b_hat is None:
            return None
        for i in range(self.n_stages):
            if np.allclose(self.A[i], self.b_hat, atol=1e-13):
                return i
        return None


def _order_conditions(A, b, c):
    """Residuals of the Butcher order conditions through order 5, grouped
    per order."""
    Ac = A @ c
    conds = {
        1: [b.sum() - 1.0],
        2: [b @ c - 1 / 2],
        3: [b @ c**2 - 1 / 3,
            b @ Ac - 1 / 6],
        4: [b @ c**3 - 1 / 4,
            b @ (c * Ac) - 1 / 8,
            b @ (A @ c**2) - 1 / 12,
            b @ (A @ Ac) - 1 / 24],
        5: [b @ c**4 - 1 / 5,
            b @ (c**2 * Ac) - 1 / 10,
            b @ (Ac * Ac) - 1 / 20,
            b @ (c * (A @ c**2)) - 1 / 15,
            b @ (c * (A @ Ac)) - 1 / 30,
            b @ (A @ c**3) - 1 / 20,
            b @ (A @ (c * Ac)) - 1 / 40,
            b @ (A @ (A @ c**2)) - 1 / 60,
            b @ (A @ (A @ Ac)) - 1 / 120],
    }
    return conds


def check_order(A, b, c, order, tol=5e-10):
    """Verify the order conditions up to `order` hold for weights b."""
    if order > 5:
        raise TableauError("order conditions implemented up to order 5")
    conds = _order_conditions(np.asarray(A, float), np.asarray(b, float),
                              np.asarray(c, float))
    for p in range(1, order + 1):
        for k, r in enumerate(conds[p]):
            if abs(r) > tol:
                raise TableauError(
                    f"order-{p} condition {k} violated (residual {r:.3e})")


def validate_tableau(tab, tol=5e-10):
    """Structural and order checks; raises TableauError on failure."""
    A, b, c = tab.A, tab.b, tab.c
    s = tab.n_stages
    if A.shape != (s, s) or c.shape != (s,):
        raise TableauError(f"{tab.name}: inconsistent dimensions")
    if not np.allclose(A.sum(axis=1), c, atol=tol):
        raise TableauError(f"{tab.name}: row sums of A do not match c")
    if np.any(np.triu(A, 1) != 0.0):
        raise TableauError(f"{tab.name}: A is not lower triangular")
    diag = np.diag(A)
    start = 1 if tab.first_stage_explicit else 0
    if np.ptp(diag[start:]) > tol:
        raise TableauError(f"{tab.name}: implicit diagonal entries differ")
    if not tab.stiffly_accurate and not tab.reflect_constraints:
        raise TableauError(f"{tab.name}: not stiffly accurate and no "
                           "constraint-reflection fallback")
    check_order(A, b, c, tab.order, tol=tol)
    if tab.b_hat is not None:
        if tab.embedded_order is None:
            raise TableauError(f"{tab.name}: embedded weights without order")
        check_order(A, tab.b_hat, c, tab.embedded_order, tol=tol)
        # the embedded result must be higher-order-deficient, not identical
        if np.allclose(tab.b_hat, b, atol=1e-13):
            raise TableauError(f"{tab.name}: embedded weights equal b")
    return True


_G = 0.4358665215  # common diagonal of the two 3rd/4th-order ESDIRK methods

_IE = ButcherTableau(
    name="ie",
    A=[[1.0]], b=[1.0], c=[1.0], order=1, l_stable=True)

_CKN = ButcherTableau(
    name="ckn",
    A=[[0.0, 0.0], [0.5, 0.5]],
    b=[0.5, 0.5], c=[0.0, 1.0], order=2,
    l_stable=False, reflect_constraints=True)

_ESDIRK32A = ButcherTableau(
    name="esdirk32a",
    A=[[0.0, 0.0, 0.0, 0.0],
       [_G, _G, 0.0, 0.0],
       [0.490563388419108, 0.073570090080892, _G, 0.0],
       [0.308809969973036, 1.490563388254106, -1.235239879727145, _G]],
    b=[0.308809969973036, 1.490563388254106, -1.235239879727145, _G],
    c=[0.0, 2 * _G, 1.0, 1.0],
    order=3,
    b_hat=[0.490563388419108, 0.073570090080892, _G, 0.0],
    embedded_order=2)

_ESDIRK43B = ButcherTableau(
    name="esdirk43b",
    A=[[0.0, 0.0, 0.0, 0.0, 0.0],
       [_G, _G, 0.0, 0.0, 0.0],
       [0.140737774731968, -0.108365551378832, _G, 0.0, 0.0],
       [0.102399400616089, -0.376878452267324, 0.838612530151233, _G, 0.0],
       [0.157024897860995, 0.117330441357768, 0.61667803039168,
        -0.326899891110444, _G]],
    b=[0.157024897860995, 0.117330441357768, 0.61667803039168,
       -0.326899891110444, _G],
    c=[0.0, 2 * _G, 0.468238744853136, 1.0, 1.0],
    order=4,
    b_hat=[0.102399400616089, -0.376878452267324, 0.838612530151233, _G, 0.0],
    embedded_order=3)

_G5 = 0.26
_ESDIRK54A = ButcherTableau(
    name="esdirk54a",
    A=[[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
       [_G5, _G5, 0.0, 0.0, 0.0, 0.0, 0.0],
       [0.13, 0.84033320996790809, _G5, 0.0, 0.0, 0.0, 0.0],
       [0.22371961478320505, 0.47675532319799699, -0.06470895363112615,
        _G5, 0.0, 0.0, 0.0],
       [0.16648564323248321, 0.10450018841591720, 0.03631482272098715,
        -0.13090704451073998, _G5, 0.0, 0.0],
       [0.13855640231268224, 0.0, -0.04245337201752043,
        0.02446657898003141, 0.61943039072480676, _G5, 0.0],
       [0.13659751177640291, 0.0, -0.05496908796538376,
        -0.04118626728321046, 0.62993304899016403, 0.06962479448202728,
        _G5]],
    b=[0.13659751177640291, 0.0, -0.05496908796538376,
       -0.04118626728321046, 0.62993304899016403, 0.06962479448202728, _G5],
    c=[0.0, 0.52, 1.230333209967908, 0.8957659843500759, 0.43639360985864756,
       1.0, 1.0],
    order=5,
    b_hat=[0.13855640231268224, 0.0, -0.04245337201752043,
           0.02446657898003141, 0.61943039072480676, _G5, 0.0],
    embedded_order=4)

METHODS = {t.name: t for t in
           (_IE, _CKN, _ESDIRK32A, _ESDIRK43B, _ESDIRK54A)}


def get_tableau(name):
    key = name.lower().replace("-", "").replace("_", "")
    if key not in METHODS:
        raise TableauError(f"unknown method {name!r}; "
                           f"choose from {sorted(METHODS)}")
    return METHODS[key]
