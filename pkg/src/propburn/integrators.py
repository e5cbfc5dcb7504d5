"""Adaptive diagonally implicit Runge-Kutta integration of the
semi-discrete burning problem.

Every production method is stiffly accurate, so the step solution is the
last stage and the algebraic constraints hold at step ends to the Newton
tolerance.  The embedded error estimate covers the differential variables
through the lower-order quadrature weights; because the embedded weights
coincide with an interior stage, the estimate extends to the algebraic
variables by comparing that stage's state with the step end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .newton import JacobianCache, NewtonError, NewtonOptions, newton_solve
from .tableaux import get_tableau

IM, IT = 0, 1


class IntegrationError(RuntimeError):
    # kind in {"newton", "dt_underflow", "max_steps"} for exit-code mapping
    def __init__(self, msg, t=None, dt=None, kind="newton"):
        super().__init__(msg)
        self.t = t
        self.dt = dt
        self.kind = kind


@dataclass
class StepController:
    rtol: float = 1e-5
    atol: float = 1e-6
    safety: float = 0.9
    factor_min: float = 0.2
    factor_max: float = 5.0
    dt_min: float = 1e-15
    dt_max: float = math.inf
    dt_init: float = 1e-7
    # "l2": 2-norm of the scaled error vector; "rms": mesh-size-independent
    norm: str = "l2"
    # step-to-step relative variation bound used by methods without an
    # embedded error estimate (implicit Euler, trapezoidal)
    variation_bound: float = 0.02

    def combine(self, sq_sum, n):
        if self.norm == "rms":
            return math.sqrt(sq_sum / max(n, 1))
        return math.sqrt(sq_sum)


@dataclass
class StepRecord:
    t: float            # time at the END of the attempted step
    dt: float
    accepted: bool
    err: float
    newton_iters: int
    jacobian_evals: int
    T_s: float = math.nan
    m_surf: float = math.nan
    pressure: float = math.nan
    constraint_norm: float = math.nan
    cfl: float = math.nan


class RunHistory:
    """Per-step records plus optional state snapshots."""

    def __init__(self):
        self.records: list[StepRecord] = []
        self.snapshots: list[tuple[float, np.ndarray]] = []

    def append(self, rec):
        self.records.append(rec)

    def series(self, name, accepted_only=True):
        return np.array([getattr(r, name) for r in self.records
                         if r.accepted or not accepted_only])

    @property
    def n_accepted(self):
        return sum(r.accepted for r in self.records)

    @property
    def n_rejected(self):
        return sum(not r.accepted for r in self.records)

    def surface_interpolant(self, name="T_s"):
        """Cubic interpolant of a recorded surface quantity vs time."""
        from scipy.interpolate import CubicSpline
        t = self.series("t")
        v = self.series(name)
        t, idx = np.unique(t, return_index=True)
        return CubicSpline(t, v[idx])

    def to_csv(self, path_or_buf):
        buf = (path_or_buf if hasattr(path_or_buf, "write")
               else open(path_or_buf, "w"))
        try:
            buf.write("t,dt,accepted,err,newton_iters,jacobian_evals,"
                      "T_s,m_surf,pressure,constraint_norm,cfl\n")
            for r in self.records:
                buf.write(f"{float(r.t)!r},{float(r.dt)!r},{int(r.accepted)},"
                          f"{float(r.err)!r},{r.newton_iters},"
                          f"{r.jacobian_evals},{float(r.T_s)!r},"
                          f"{float(r.m_surf)!r},{float(r.pressure)!r},"
                          f"{float(r.constraint_norm)!r},{float(r.cfl)!r}\n")
        finally:
            if buf is not path_or_buf:
                buf.close()


def _conserved_tol(C_n, diff_mask, atol, rtol):
    """Per-component error tolerance in conserved-variable units.

    The absolute floor is tied to the column-wise mean magnitude so that
    near-zero entries (e.g. a depleted species) do not dominate the norm.
    """
    absC = np.abs(C_n)
    floor = np.zeros_like(C_n)
    for col in range(C_n.shape[1]):
        rows = diff_mask[:, col]
        if rows.any():
            floor[rows, col] = max(absC[rows, col].mean(), 1.0)
    return atol * floor + rtol * absC


def _step_error(disc, tab, ctrl, dt, C_n, X_n, rhs_stages, stage_states, X_new):
    """Embedded error estimate, combined over differential and algebraic
    components."""
    d = tab.b - tab.b_hat
    diff = dt * np.einsum("s,sij->ij", d, np.asarray(rhs_stages))
    tol = _conserved_tol(C_n, disc.diff_mask, ctrl.atol, ctrl.rtol)
    scaled = diff[disc.diff_mask] / tol[disc.diff_mask]
    sq = float(scaled @ scaled)
    n = scaled.size
    r = tab.embedded_stage
    if r is not None:
        mask = disc.err_alg_mask
        d_alg = (X_new - stage_states[r])[mask]
        tol_a = (ctrl.atol * np.broadcast_to(disc.scales, X_n.shape)
                 + ctrl.rtol * np.abs(X_n))[mask]
        s_alg = d_alg / tol_a
        sq += float(s_alg @ s_alg)
        n += s_alg.size
    return ctrl.combine(sq, n)


def _variation_error(disc, ctrl, X_n, X_new):
    rel = np.abs(X_new - X_n) / (np.abs(X_n) + disc.scales)
    return float(rel.max()) / ctrl.variation_bound


def _static_algebraic(disc, X, t):
    """Non-continuity algebraic residuals at a state (continuity rows are
    stage-form and excluded)."""
    g = disc.algebraic(X, t)
    g[disc.gas, IM][1:] = 0.0
    return g


def dirk_step(disc, X_n, t_n, dt, tab, newton_opts, cache, ctrl):
    """One attempted step.  Returns (X_new, err, info)."""
    P_n = disc.forcing.pressure(t_n)
    C_n = disc.conserved(X_n, P_n)
    rho_n = disc.gas_density(X_n, P_n)
    s = tab.n_stages
    rhs_stages = []
    r_stages = []
    stage_states = []
    X_guess = X_n
    iters = 0
    jevals = 0
    alg_target = None
    if tab.reflect_constraints:
        alg_target = -_static_algebraic(disc, X_n, t_n)
    for i in range(s):
        a_ii = float(tab.A[i, i])
        t_i = t_n + float(tab.c[i]) * dt
        if a_ii == 0.0:
            X_i = X_n
        else:
            sum_rhs = np.zeros_like(X_n)
            sum_r = np.zeros(disc.Ng)
            for j in range(i):
                aij = float(tab.A[i, j])
                if aij != 0.0:
                    sum_rhs += aij * rhs_stages[j]
                    sum_r += aij * r_stages[j]
            target = alg_target if (alg_target is not None and i == s - 1) else None

            def residual(X, _t=t_i, _a=a_ii, _sr=sum_rhs, _sc=sum_r, _tg=target):
                return disc.stage_residual(X, _t, dt, _a, C_n, rho_n,
                                           _sr, _sc, alg_target=_tg)

            X_i, info = newton_solve(residual, X_guess, disc.scales,
                                     newton_opts, cache, coeff=a_ii * dt)
            iters += info["iterations"]
            jevals += info["jacobian_evals"]
        rhs_stages.append(disc.rhs(X_i, t_i))
        r_stages.append(disc.cell_drho_dt(X_i))
        stage_states.append(X_i)
        X_guess = X_i
    X_new = stage_states[-1]
    if tab.b_hat is not None:
        err = _step_error(disc, tab, ctrl, dt, C_n, X_n,
                          rhs_stages, stage_states, X_new)
    else:
        err = _variation_error(disc, ctrl, X_n, X_new)
    # constraint-drift measure at the step end, expressed in Newton step
    # units through the cached Jacobian factorization
    cnorm = math.nan
    if cache.factors is not None:
        a_ii = float(tab.A[-1, -1])
        sum_rhs = np.zeros_like(X_n)
        sum_r = np.zeros(disc.Ng)
        for j in range(s - 1):
            aij = float(tab.A[-1, j])
            if aij != 0.0:
                sum_rhs += aij * rhs_stages[j]
                sum_r += aij * r_stages[j]
        F = disc.stage_residual(X_new, t_n + dt, dt, a_ii, C_n, rho_n,
                                sum_rhs, sum_r,
                                alg_target=alg_target)
        dx = kernels.solve(cache.factors, F)
        cnorm = float(np.sqrt(np.mean((dx / disc.scales) ** 2)))
    return X_new, err, {"newton_iters": iters, "jacobian_evals": jevals,
                        "constraint_norm": cnorm}


def consistent_initialization(disc, X0, t0, newton_opts=None, dt_micro=1e-12):
    """Project an initial guess onto the constraint manifold with one
    implicit-Euler micro-step.

    The 1/dt scaling of the continuity rows limits the attainable Newton
    step norm at this dt, so the projection runs at a slightly relaxed
    tolerance; the first regular steps tighten the constraints further.

    The micro-step cannot imprint the instantaneous density rate on the
    mass-flow profile (the density change over dt_micro is far below the
    attainable Newton resolution), so the gas m-profile is rebuilt
    afterwards from the equation-of-state chain rule.  Without this the
    first-step error estimate carries a dt-independent floor whenever the
    imposed dP/dt is nonzero at t0.
    """
    tab = get_tableau("ie")
    base = newton_opts or NewtonOptions()
    opts = NewtonOptions(tol=max(base.tol, 1e-6), max_iters=base.max_iters,
                         max_jacobian_evals=base.max_jacobian_evals,
                         min_damping=base.min_damping,
                         stale_iters=base.stale_iters)
    cache = JacobianCache()
    ctrl = StepController()
    X, _, _ = dirk_step(disc, np.asarray(X0, dtype=float), t0, dt_micro,
                        tab, opts, cache, ctrl)
    return disc.consistent_mass_flow(X, t0)


def _cfl(disc, X, dt):
    P = disc.forcing.pressure(0.0)
    try:
        rho = disc.gas_density(X, P)
    except Exception:
        return math.nan
    u = np.abs(X[disc.gas, IM]) / rho
    return float((u * dt / disc.mesh.gas_widths).max())


def integrate(disc, X0, t_span, method="esdirk43b", controller=None,
              newton=None, fixed_dt=None, consistent_init=True,
              store_states=False, save_times=None, max_steps=2_000_000,
              raise_on_failure=True):
    """Integrate from t_span[0] to t_span[1].

    fixed_dt disables step adaptation.  save_times requests state snapshots
    (linearly interpolated between step ends); store_states snapshots every
    accepted step.  Returns (X_end, RunHistory).  When raise_on_failure is
    False, a Newton/step-size failure terminates the run and is recorded on
    history.failure instead of raising.
    """
    tab = get_tableau(method) if isinstance(method, str) else method
    ctrl = controller or StepController()
    opts = newton or NewtonOptions()
    t0, t_end = float(t_span[0]), float(t_span[1])
    X = np.array(X0, dtype=float, copy=True)
    if consistent_init:
        X = consistent_initialization(disc, X, t0, opts)
    hist = RunHistory()
    hist.failure = None
    cache = JacobianCache()
    save = sorted(save_times) if save_times else []
    isave = 0
    if store_states:
        hist.snapshots.append((t0, X.copy()))
    t = t0
    dt = fixed_dt if fixed_dt is not None else min(ctrl.dt_init,
                                                   ctrl.dt_max, t_end - t0)
    for _ in range(max_steps):
        if t >= t_end - 1e-14 * max(abs(t_end), 1.0):
            break
        dt = min(dt, t_end - t)
        try:
            X_new, err, info = dirk_step(disc, X, t, dt, tab, opts, cache, ctrl)
            failed = False
        except NewtonError as exc:
            failed = True
            err = math.inf
            info = {"newton_iters": 0, "jacobian_evals": 0,
                    "constraint_norm": math.nan}
            newton_exc = exc
        if failed:
            hist.append(StepRecord(t=t + dt, dt=dt, accepted=False, err=err,
                                   newton_iters=info["newton_iters"],
                                   jacobian_evals=info["jacobian_evals"]))
            cache.invalidate()
            if fixed_dt is not None:
                msg = f"Newton failure at t={t:.6e} with fixed dt={dt:.3e}: {newton_exc}"
                if raise_on_failure:
                    raise IntegrationError(msg, t=t, dt=dt) from newton_exc
                hist.failure = msg
                return X, hist
            dt *= 0.5
            if dt < ctrl.dt_min:
                msg = f"step size underflow at t={t:.6e} (dt={dt:.3e})"
                if raise_on_failure:
                    raise IntegrationError(msg, t=t, dt=dt,
                                           kind="dt_underflow") from newton_exc
                hist.failure = msg
                return X, hist
            continue
        accepted = (err <= 1.0) or (fixed_dt is not None)
        rec = StepRecord(
            t=t + dt, dt=dt, accepted=accepted, err=err,
            newton_iters=info["newton_iters"],
            jacobian_evals=info["jacobian_evals"],
            constraint_norm=info["constraint_norm"],
            T_s=float(X_new[disc.S, IT]), m_surf=float(X_new[disc.S, IM]),
            pressure=disc.forcing.pressure(t + dt),
            cfl=_cfl(disc, X_new, dt))
        hist.append(rec)
        if accepted:
            t_prev, X_prev = t, X
            t, X = t + dt, X_new
            while isave < len(save) and save[isave] <= t + 1e-14:
                ts = save[isave]
                w = 0.0 if dt == 0 else np.clip((ts - t_prev) / dt, 0.0, 1.0)
                hist.snapshots.append((ts, (1 - w) * X_prev + w * X))
                isave += 1
            if store_states:
                hist.snapshots.append((t, X.copy()))
        if fixed_dt is None:
            # classic error-proportional controller with clamped factors
            q = tab.embedded_order if tab.b_hat is not None else 1
            fac = ctrl.safety * (max(err, 1e-12)) ** (-1.0 / (q + 1))
            dt = dt * float(np.clip(fac, ctrl.factor_min, ctrl.factor_max))
            dt = min(dt, ctrl.dt_max)
            if dt < ctrl.dt_min:
                msg = f"step size underflow at t={t:.6e}"
                if raise_on_failure:
                    raise IntegrationError(msg, t=t, dt=dt,
                                           kind="dt_underflow")
                hist.failure = msg
                return X, hist
    else:
        msg = f"max_steps={max_steps} exceeded at t={t:.6e}"
        if raise_on_failure:
            raise IntegrationError(msg, t=t, dt=dt, kind="max_steps")
        hist.failure = msg
    return X, hist
