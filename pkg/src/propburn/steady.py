"""Steadily burning solutions and their parametric sensitivities.

Two independent routes to the steady state are provided:

* steady_by_shooting: the steady equations in the surface-fixed frame are
  solved directly.  The solid temperature profile is the analytic
  exponential; the gas phase is a two-point boundary value problem solved
  by collocation; the regression speed is the shooting eigenvalue that
  closes the interface energy balance, bracketed by a root solve.
* steady_by_relaxation: the unsteady finite-volume system is marched with
  implicit Euler and geometrically growing steps until transients die.

Agreement between the two is a strong end-to-end check, since they share
no discretization machinery.
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_bvp
from scipy.optimize import brentq

from .discretization import IM, IT, Discretization, Forcing


class SteadyError(RuntimeError):
    pass


@dataclass
class SteadySolution:
    """A steadily burning state at fixed pressure and far-field temperature."""
    P: float
    T0: float
    c: float                 # regression speed [m/s]
    m: float                 # mass flow rate [kg/(m^2 s)]
    T_s: float
    Y_s: np.ndarray
    x_gas: np.ndarray
    T_gas: np.ndarray
    Y_gas: np.ndarray        # (n_x, ne)
    solid_decay: float       # m c_c / lambda_c [1/m]

    def solid_temperature(self, x):
        """Analytic exponential solid profile, x <= 0."""
        return self.T0 + (self.T_s - self.T0) * np.exp(self.solid_decay * np.asarray(x))

    @property
    def flame_temperature(self):
        return float(self.T_gas[-1])

    def combined_profile(self, n_solid=400):
        """(x, T) samples across both phases, for mesh generation."""
        depth = 12.0 / self.solid_decay
        xs = -np.geomspace(1e-9, depth, n_solid)[::-1]
        x = np.concatenate([xs, self.x_gas])
        T = np.concatenate([self.solid_temperature(xs), self.T_gas])
        keep = np.concatenate([[True], np.diff(x) > 0])
        return x[keep], T[keep]

    def gas_interp(self, x):
        T = np.interp(x, self.x_gas, self.T_gas)
        Y = np.column_stack([np.interp(x, self.x_gas, self.Y_gas[:, k])
                             for k in range(self.Y_gas.shape[1])])
        return T, Y

    def to_state(self, disc):
        """Project onto a discretization's mesh as an initial state."""
        T_sol = self.solid_temperature(disc.mesh.solid_centers)
        Tg, Yg = self.gas_interp(disc.mesh.gas_centers)
        return disc.state_from_profiles(T_sol, self.T_s, self.Y_s,
                                        Tg, Yg, m_surf=self.m)

    def to_csv_text(self):
        """Serialize to CSV: metadata header plus the gas-phase table.

        The solid profile is analytic and is reconstructed from the
        metadata on load.
        """
        meta = dict(P=self.P, T0=self.T0, c=self.c, m=self.m, T_s=self.T_s,
                    solid_decay=self.solid_decay)
        lines = ["# " + " ".join(f"{k}={v!r}" for k, v in meta.items()),
                 "# Y_s=" + ",".join(repr(float(v)) for v in self.Y_s),
                 "# x,T," + ",".join(f"Y_{k}" for k in
                                     range(self.Y_gas.shape[1]))]
        for i in range(len(self.x_gas)):
            row = [self.x_gas[i], self.T_gas[i], *self.Y_gas[i]]
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text):
        meta = {}
        Y_s = None
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("Y_s="):
                    Y_s = np.array([float(v) for v in body[4:].split(",")])
                elif "=" in body and not body.startswith("x,"):
                    for item in body.split():
                        k, _, v = item.partition("=")
                        meta[k] = float(v)
                continue
            rows.append([float(v) for v in line.split(",")])
        data = np.array(rows)
        return cls(P=meta["P"], T0=meta["T0"], c=meta["c"], m=meta["m"],
                   T_s=meta["T_s"], Y_s=Y_s, x_gas=data[:, 0],
                   T_gas=data[:, 1], Y_gas=data[:, 2:],
                   solid_decay=meta["solid_decay"])


def preset_steady(name):
    """Bundled steady solution for a model preset ('baseline' or 'unstable')."""
    from .config import preset_text
    return SteadySolution.from_csv_text(preset_text(f"{name}_steady.csv"))


def _surface_temperature(model, m):
    """Invert the pyrolysis law for the surface temperature."""
    if m <= 0 or m >= model.surface.A_p:
        raise SteadyError(f"mass flux {m} outside the pyrolysis range")
    return -model.surface.T_ap / math.log(m / model.surface.A_p)


class _GasBVPResult:
    """Gas-phase steady profile in physical units."""

    def __init__(self, sol, delta):
        self.success = sol.success
        self.message = sol.message
        self.delta = delta
        self.x = sol.x * delta                # physical abscissa
        ne = (sol.y.shape[0] - 2) // 2
        self.T = sol.y[0]
        self.dTdx = sol.y[1] / delta
        self.Y = sol.y[2:2 + ne].T
        self.n_nodes = sol.x.size


def _gas_bvp(model, P, m, T_s, span=30.0, n_init=120, tol=1e-8, guess=None):
    """Solve the steady gas equations for given m, T_s.

    Works in the flame-fitted coordinate xi = x / delta with
    delta = lambda / (c_p m), on [0, span].  State vector:
    [T, dT/dxi, Y_1..Y_ne, dY_1/dxi..dY_ne/dxi].  Boundary conditions:
    T(0)=T_s, total species flux at the surface equals the injected flux,
    zero gradients far away.
    """
    ne = model.n_species
    lam = model.transport.lam
    Y_inj = model.surface.Y_inj
    dh = model._dh_f
    cps = model._c_p
    delta = lam / (model.mixture_cp(Y_inj) * m)

    def rhs(xi, y):
        T = np.clip(np.nan_to_num(y[0], nan=300.0), 200.0, 6000.0)
        q = y[1]                      # dT/dxi
        Y = y[2:2 + ne].T             # (n, ne)
        Z = y[2 + ne:].T              # dY/dxi
        Y_cl = np.clip(Y, 0.0, 1.0)
        ysum = Y_cl.sum(-1, keepdims=True)
        Y_nrm = np.where(ysum > 1e-2, Y_cl / np.maximum(ysum, 1e-2),
                         1.0 / ne)
        rho = model.density(P, T, Y_nrm)
        omega = model.production_rates(T, Y_cl, rho)
        cp = model.mixture_cp(Y_cl)
        rhoD = lam / cp
        hk = model.species_enthalpies(T)          # (n, ne)
        J = -rhoD[:, None] * Z / delta            # physical diffusive flux
        dq = (delta / lam) * (m * cp * q
                              + delta * (hk * omega).sum(-1)
                              + q * (cps * J).sum(-1))
        drhoD_dx = -(lam / cp**2) * (Z @ cps) / delta
        dZ = (delta / rhoD[:, None]) * (m * Z - delta * omega
                                        - drhoD_dx[:, None] * Z)
        return np.vstack([q, dq, Z.T, dZ.T])

    def bc(y0, y1):
        cp0 = model.mixture_cp(np.clip(y0[2:2 + ne], 0.0, 1.0))
        rhoD0 = lam / cp0
        res = np.empty(2 + 2 * ne)
        res[0] = y0[0] - T_s
        res[1:1 + ne] = (-rhoD0 * y0[2 + ne:] / delta
                         - m * (Y_inj - y0[2:2 + ne]))
        res[1 + ne] = y1[1]
        res[2 + ne:] = y1[2 + ne:]
        return res

    # far temperature from global enthalpy conservation with complete burnout
    h_in = model.solid.enthalpy(model.solid.T0)
    Y_burnt = np.zeros(ne)
    Y_burnt[np.argmin(dh)] = 1.0
    T_far = (h_in - float(dh @ Y_burnt)) / float(cps @ Y_burnt)
    if guess is not None:
        xi, y = guess
        xi = xi.copy()
        y = y.copy()
        y[0, 0] = T_s
    else:
        xi = span * np.linspace(0.0, 1.0, n_init) ** 1.3
        prog = 1.0 - np.exp(-xi / 3.0)
        y = np.zeros((2 + 2 * ne, n_init))
        y[0] = T_s + (T_far - T_s) * prog
        y[1] = np.gradient(y[0], xi)
        for k in range(ne):
            y[2 + k] = Y_inj[k] + (Y_burnt[k] - Y_inj[k]) * prog
            y[2 + ne + k] = np.gradient(y[2 + k], xi)
    sol = solve_bvp(rhs, bc, xi, y, tol=tol, max_nodes=120000, verbose=0)
    return _GasBVPResult(sol, delta), (sol.x, sol.y), T_far


def steady_by_shooting(model, P, c_bounds=(1e-5, 1.0), span=30.0, tol=1e-6,
                       xtol=1e-12):
    """Steadily burning solution by shooting on the regression speed.

    The interface energy balance closes when the gas-side conductive flux
    matches the solid preheat requirement minus the surface heat release;
    its residual as a function of the regression speed is driven to zero by
    a bracketing root solve.
    """
    sol_cache = {}
    warm = [None]

    def interface_residual(c, strict=True, bvp_tol=None):
        bvp_tol = tol if bvp_tol is None else bvp_tol
        m = model.solid.rho * c
        T_s = _surface_temperature(model, m)
        res, wdata, _ = _gas_bvp(model, P, m, T_s, span=span, tol=bvp_tol,
                                 guess=warm[0])
        if not res.success and warm[0] is not None:
            res, wdata, _ = _gas_bvp(model, P, m, T_s, span=span, tol=bvp_tol)
        if not res.success and bvp_tol < 1e-6:
            # tolerance continuation: converge loosely, then refine warm
            res, wdata, _ = _gas_bvp(model, P, m, T_s, span=span, tol=1e-6,
                                     guess=warm[0])
            if res.success:
                res, wdata, _ = _gas_bvp(model, P, m, T_s, span=span,
                                         tol=bvp_tol, guess=wdata)
        if not res.success:
            if strict:
                raise SteadyError(f"gas BVP failed at c={c}: {res.message}")
            return None
        warm[0] = wdata
        need = m * model.solid.c * (T_s - model.solid.T0) - m * model.q_pyro(T_s)
        sol_cache[c] = (res, m, T_s)
        return model.transport.lam * res.dTdx[0] - need

    # coarse logarithmic scan from fast to slow burning, so the warm start
    # continues the burning branch; collocation failures near the bracket
    # ends are tolerated.  Root refinement on the first sign change.
    grid = np.geomspace(c_bounds[1], c_bounds[0], 25)
    scan_tol = max(tol, 1e-6)
    prev = None
    bracket = None
    for c in grid:
        f = interface_residual(c, strict=False, bvp_tol=scan_tol)
        if f is None:
            prev = None
            continue
        if prev is not None and prev[1] * f <= 0.0:
            bracket = (c, prev[0])
            break
        prev = (c, f)
    if bracket is None:
        raise SteadyError(
            f"no sign change of the interface residual on {c_bounds}")
    c = brentq(interface_residual, *bracket, xtol=xtol, rtol=1e-12)
    if c not in sol_cache:
        interface_residual(c)
    res, m, T_s = sol_cache[c]
    return SteadySolution(P=float(P), T0=model.solid.T0, c=float(c),
                          m=float(m), T_s=float(T_s),
                          Y_s=res.Y[0].copy(), x_gas=res.x.copy(),
                          T_gas=res.T.copy(), Y_gas=res.Y.copy(),
                          solid_decay=m * model.solid.c / model.solid.lam)


def steady_by_relaxation(model, mesh, P, X0=None, dt0=1e-6, dt_growth=2.0,
                         dt_max=10.0, tol=1e-10, max_steps=400,
                         newton=None, return_history=False):
    """Relax the unsteady finite-volume system to steady state.

    Implicit Euler with geometrically growing steps; converged when the
    relative state change per unit time drops below tol.
    """
    from .integrators import StepController, dirk_step
    from .newton import JacobianCache, NewtonError, NewtonOptions
    from .tableaux import get_tableau

    disc = Discretization(model, mesh, Forcing.constant(P))
    if X0 is None:
        sol = steady_by_shooting(model, P)
        X = sol.to_state(disc)
    else:
        X = np.array(X0, dtype=float, copy=True)
    tab = get_tableau("ie")
    opts = newton or NewtonOptions()
    cache = JacobianCache()
    ctrl = StepController()
    from .integrators import consistent_initialization
    X = consistent_initialization(disc, X, 0.0, opts)
    dt = dt0
    t = 0.0
    rates = []
    for _ in range(max_steps):
        try:
            X_new, _, _ = dirk_step(disc, X, t, dt, tab, opts, cache, ctrl)
        except NewtonError:
            cache.invalidate()
            dt *= 0.25
            if dt < 1e-15:
                raise SteadyError("relaxation failed: step size underflow")
            continue
        rate = float(np.max(np.abs(X_new - X) /
                            (np.abs(X) + disc.scales))) / dt
        rates.append((t + dt, dt, rate))
        X = X_new
        t += dt
        if rate < tol and dt >= dt_max:
            break
        dt = min(dt * dt_growth, dt_max)
    else:
        if rate > tol * 100:
            raise SteadyError(f"relaxation did not converge (rate {rate:.3e})")
    if return_history:
        return disc, X, rates
    return disc, X


def steady_sensitivities(model, P, dT0=1.0, dP_rel=1e-3, **kw):
    """Steady response coefficients by parametric differencing.

    Returns a dict with the base solution and the dimensionless groups of
    the linearized surface response: temperature sensitivity sigma_p, its
    product k with the surface superheat, the surface-temperature
    sensitivity r, the pressure exponent n, and the Arrhenius groups A and
    B of the flame transfer function.
    """
    base = steady_by_shooting(model, P, **kw)
    solid_hot = dataclasses.replace(model.solid, T0=model.solid.T0 + dT0)
    model_hot = dataclasses.replace(model, solid=solid_hot)
    hot = steady_by_shooting(model_hot, P, **kw)
    high = steady_by_shooting(model, P * (1.0 + dP_rel), **kw)

    sigma_p = (math.log(hot.m) - math.log(base.m)) / dT0
    r = (hot.T_s - base.T_s) / dT0
    n = (math.log(high.m) - math.log(base.m)) / math.log(1.0 + dP_rel)
    superheat = base.T_s - model.solid.T0
    k = superheat * sigma_p
    A = superheat * model.surface.T_ap / base.T_s**2
    B = 1.0 / k if k != 0 else math.inf
    return {
        "base": base, "sigma_p": sigma_p, "r": r, "n": n, "k": k,
        "A": A, "B": B, "superheat": superheat,
        "thermal_time": model.solid.thermal_diffusivity / base.c**2,
    }
