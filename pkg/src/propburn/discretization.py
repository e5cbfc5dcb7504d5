"""Semi-discrete form of the coupled solid/surface/gas burning problem.

The state is an (N, nv) array with one row per mesh entity and columns
[m, T, Y_1..Y_ne]:

* rows 0..Nc-1: solid cells, deep to surface.  T is differential
  (conserved quantity rho_c h_c); m duplicates the regression mass flux
  (algebraic chain m_i = m_{i+1} ending at the surface value); Y is unused.
* row Nc: the interface block [m_surf, T_s, Y_s,k], all algebraic.
* rows Nc+1..Nc+Ng: gas cells.  T, Y are differential (conserved rho h and
  rho Y_k); m is the mass flow rate at the cell's LEFT face, determined by
  the quasi-incompressible continuity constraint.

This yields a semi-explicit index-1 DAE; every residual row couples only
to its two neighbor rows, so the Jacobian is block tridiagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

IM, IT = 0, 1
IY = slice(2, None)


def default_absorption_coefficient(model, T_ref=1000.0):
    """In-depth radiation absorption coefficient [1/m] chosen so 95% of the
    transmitted flux is deposited within one conductive thermal thickness of
    the solid, evaluated at the pyrolysis rate for surface temperature T_ref."""
    c_ref = model.surface.mass_flux(T_ref) / model.solid.rho
    delta = model.solid.thermal_diffusivity / c_ref
    return math.log(20.0) / delta


@dataclass
class Forcing:
    """Imposed chamber pressure and external radiant flux.

    beta_s is the fraction of the radiant flux absorbed at the surface
    itself; the remainder is deposited in depth with a Beer-Lambert profile
    of absorption coefficient kappa [1/m].
    """
    pressure: Callable[[float], float]
    dpressure_dt: Callable[[float], float]
    laser: Callable[[float], float] = field(default=lambda t: 0.0)
    beta_s: float = 0.5
    kappa: float | None = None

    @classmethod
    def constant(cls, P, **kw):
        return cls(pressure=lambda t: P, dpressure_dt=lambda t: 0.0, **kw)

    @classmethod
    def harmonic(cls, P_mean, rel_amplitude, frequency, **kw):
        w = 2.0 * math.pi * frequency
        a = P_mean * rel_amplitude
        return cls(pressure=lambda t: P_mean + a * math.sin(w * t),
                   dpressure_dt=lambda t: a * w * math.cos(w * t), **kw)

    @classmethod
    def constant_with_laser(cls, P, flux, t_on=0.0, t_off=math.inf, **kw):
        return cls(pressure=lambda t: P, dpressure_dt=lambda t: 0.0,
                   laser=lambda t: flux if t_on <= t < t_off else 0.0, **kw)


def peclet_weights(pe):
    """Downwind weight of the convective face interpolation.

    Centered (0.5) for |Pe| <= 0.5, full upwind for |Pe| >= 1, linear blend
    in between.  Returns (phi_minus, phi_plus), the weights of the left and
    right neighbor values.
    """
    pe = np.asarray(pe, dtype=float)
    phi_plus = np.where(pe >= 0.0,
                        np.clip(1.0 - pe, 0.0, 0.5),
                        np.clip(-pe, 0.5, 1.0))
    return 1.0 - phi_plus, phi_plus


class Discretization:
    """Spatial residual assembly on a staggered mesh for one model/forcing."""

    def __init__(self, model, mesh, forcing):
        self.model = model
        self.mesh = mesh
        self.forcing = forcing
        self.ne = model.n_species
        self.nv = 2 + self.ne
        self.Nc = mesh.n_solid
        self.Ng = mesh.n_gas
        self.S = self.Nc                      # surface row index
        self.n_rows = self.Nc + 1 + self.Ng
        self.solid = slice(0, self.Nc)
        self.gas = slice(self.Nc + 1, self.n_rows)
        if forcing.kappa is None:
            forcing.kappa = default_absorption_coefficient(model)
        # differential components: solid T, gas T and Y
        dm = np.zeros((self.n_rows, self.nv), dtype=bool)
        dm[self.solid, IT] = True
        dm[self.gas, IT] = True
        dm[self.gas, IY] = True
        self.diff_mask = dm
        self.alg_mask = ~dm
        # algebraic entries subject to step-error control: the mass flow at
        # the face next to the outflow cell is excluded.  That cell carries
        # no continuity constraint (its outflow face is extrapolated), and
        # the mismatch between its equation-of-state density rate and the
        # closure feeds a stage-to-stage wiggle into the adjacent face that
        # does not vanish with dt; everything upstream is clean.
        em = self.alg_mask.copy()
        em[self.n_rows - 1, IM] = False
        self.err_alg_mask = em
        # typical magnitudes per component, for Newton scaling and FD steps
        self.scales = np.array([1.0, 300.0] + [1.0] * self.ne)

    # ------------------------------------------------------------------
    # state construction

    def cold_state(self, T=None, Y_gas=None):
        """Quiescent state at uniform temperature (default: far-field T0).

        `Y_gas` sets the initial gas composition (default: the injected
        mixture); ignition runs start from fully burnt products instead.
        """
        T = self.model.solid.T0 if T is None else T
        if Y_gas is None:
            Y_gas = self.model.surface.Y_inj
        X = np.zeros((self.n_rows, self.nv))
        m0 = self.model.surface.mass_flux(T)
        X[:, IM] = m0
        X[:, IT] = T
        X[self.S, IY] = self.model.surface.Y_inj
        X[self.gas, IY] = Y_gas
        return X

    def state_from_profiles(self, T_solid, T_s, Y_s, T_gas, Y_gas, m_surf=None):
        X = np.zeros((self.n_rows, self.nv))
        if m_surf is None:
            m_surf = self.model.surface.mass_flux(T_s)
        X[:, IM] = m_surf
        X[self.solid, IT] = T_solid
        X[self.S, IT] = T_s
        X[self.S, IY] = Y_s
        X[self.gas, IT] = T_gas
        X[self.gas, IY] = Y_gas
        return X

    # ------------------------------------------------------------------
    # pieces of the semi-discrete system

    def gas_density(self, X, P):
        return self.model.density(P, X[self.gas, IT], X[self.gas, IY])

    def conserved(self, X, P):
        """Per-volume conserved quantities in the differential components."""
        C = np.zeros_like(X)
        sol = self.model.solid
        C[self.solid, IT] = sol.rho * sol.enthalpy(X[self.solid, IT])
        T, Y = X[self.gas, IT], X[self.gas, IY]
        rho = self.model.density(P, T, Y)
        C[self.gas, IT] = rho * self.model.enthalpy(T, Y)
        C[self.gas, IY] = rho[:, None] * Y
        return C

    def rhs(self, X, t):
        """Time derivative of the conserved quantities (differential rows)."""
        P = self.forcing.pressure(t)
        dPdt = self.forcing.dpressure_dt(t)
        out = np.zeros_like(X)
        self._solid_rhs(X, t, out)
        self._gas_rhs(X, P, dPdt, out)
        return out

    def _solid_rhs(self, X, t, out):
        sol = self.model.solid
        T = X[self.solid, IT]
        m = X[self.solid, IM]
        T_s = X[self.S, IT]
        m_surf = X[self.S, IM]
        xc = self.mesh.solid_centers
        dx = self.mesh.solid_widths
        xf = self.mesh.solid_faces
        Nc = self.Nc
        h = sol.enthalpy(T)
        # convective fluxes (+x) at the Nc+1 faces; solid material streams
        # toward the surface, upwind donor is the left neighbor
        conv = np.empty(Nc + 1)
        conv[0] = m[0] * sol.enthalpy(sol.T0)
        conv[1:Nc] = m[:-1] * h[:-1]
        conv[Nc] = m_surf * sol.enthalpy(T_s)
        # temperature gradients at faces; adiabatic far field
        grad = np.zeros(Nc + 1)
        grad[1:Nc] = (T[1:] - T[:-1]) / (xc[1:] - xc[:-1])
        grad[Nc] = (T_s - T[-1]) / (0.0 - xc[-1])
        net = (conv[:-1] - conv[1:]) + sol.lam * (grad[1:] - grad[:-1])
        flux = self.forcing.laser(t)
        if flux != 0.0:
            k = self.forcing.kappa
            net = net + (1.0 - self.forcing.beta_s) * flux * (
                np.exp(k * xf[1:]) - np.exp(k * xf[:-1]))
        out[self.solid, IT] = net / dx

    def _gas_rhs(self, X, P, dPdt, out):
        mdl = self.model
        lam = mdl.transport.lam
        m = X[self.gas, IM]
        T = X[self.gas, IT]
        Y = X[self.gas, IY]
        T_s = X[self.S, IT]
        Y_s = X[self.S, IY]
        xc = self.mesh.gas_centers
        dx = self.mesh.gas_widths
        Ng = self.Ng
        rho = mdl.density(P, T, Y)
        h = mdl.enthalpy(T, Y)
        cp = mdl.mixture_cp(Y)
        # mass flow at the Ng+1 faces; outflow face extrapolated
        m_face = np.concatenate([m, m[-1:]])
        # interior faces 1..Ng-1: Peclet-weighted convective interpolation
        pe_cell = cp * m / lam
        pe_face = 0.5 * (pe_cell[:-1] + pe_cell[1:]) * (xc[1:] - xc[:-1])
        wl, wr = peclet_weights(pe_face)
        Yf = wl[:, None] * Y[:-1] + wr[:, None] * Y[1:]
        hf = wl * h[:-1] + wr * h[1:]
        dxi = xc[1:] - xc[:-1]
        Tf = 0.5 * (T[:-1] + T[1:])
        Ym = 0.5 * (Y[:-1] + Y[1:])
        rhoD = lam / mdl.mixture_cp(Ym)
        Jf = -rhoD[:, None] * (Y[1:] - Y[:-1]) / dxi[:, None]
        gradT = (T[1:] - T[:-1]) / dxi
        FY = np.empty((Ng + 1, self.ne))
        Fh = np.empty(Ng + 1)
        FY[1:Ng] = m_face[1:Ng, None] * Yf + Jf
        Fh[1:Ng] = (m_face[1:Ng] * hf
                    + (mdl.species_enthalpies(Tf) * Jf).sum(axis=-1)
                    - lam * gradT)
        # surface face: injected state, upwind from the interface
        rhoD_s = lam / mdl.mixture_cp(Y_s)
        J_s = -rhoD_s * (Y[0] - Y_s) / xc[0]
        FY[0] = m_face[0] * Y_s + J_s
        Fh[0] = (m_face[0] * mdl.enthalpy(T_s, Y_s)
                 + float((mdl.species_enthalpies(T_s) * J_s).sum())
                 - lam * (T[0] - T_s) / xc[0])
        # outflow face: pure upwind, no diffusive transport
        FY[Ng] = m_face[Ng] * Y[-1]
        Fh[Ng] = m_face[Ng] * h[-1]
        omega = mdl.production_rates(T, Y, rho)
        out[self.gas, IY] = (FY[:-1] - FY[1:]) / dx[:, None] + omega
        out[self.gas, IT] = (Fh[:-1] - Fh[1:]) / dx + dPdt

    def cell_drho_dt(self, X):
        """d(rho)/dt per gas cell implied by the face mass flows, -dm/dx.

        The outflow face is extrapolated, so the value for the last cell is
        zero by construction; only cells that carry a downstream continuity
        constraint use it.
        """
        m = X[self.gas, IM]
        m_face = np.concatenate([m, m[-1:]])
        return -(m_face[1:] - m_face[:-1]) / self.mesh.gas_widths

    def chain_rho_rate(self, X, t):
        """Per-gas-cell d(rho)/dt from the equation of state chain rule.

        Uses the conservative rates R = rhs(X, t): the temperature rate
        follows exactly from d(rho h)/dt and d(rho Y)/dt as
        dT/dt = (R_h - sum_k h_k R_k)/(rho c_p), the density rate recovered
        from the species balances is sum_k R_k, and the log-derivative of
        the ideal-gas law combines them with the imposed dP/dt.  Unlike the
        mass-flow recovery this is meaningful for states whose m-profile
        does not yet reflect the current forcing.
        """
        P = self.forcing.pressure(t)
        dPdt = self.forcing.dpressure_dt(t)
        mdl = self.model
        R = self.rhs(X, t)
        T = X[self.gas, IT]
        Y = X[self.gas, IY]
        rho = mdl.density(P, T, Y)
        cp = mdl.mixture_cp(Y)
        h_k = mdl.species_enthalpies(T)
        R_h = R[self.gas, IT]
        R_Y = R[self.gas, IY]
        T_rate = (R_h - (h_k * R_Y).sum(axis=-1)) / (rho * cp)
        W = mdl.molar_masses
        sigma = (Y / W).sum(axis=-1)
        rho_rec = R_Y.sum(axis=-1)
        sigma_rate = ((R_Y / W).sum(axis=-1) - rho_rec * sigma) / rho
        return rho * (dPdt / P - T_rate / T - sigma_rate / sigma)

    def consistent_mass_flow(self, X, t, sweeps=3):
        """Rebuild the gas m-profile from the chain-rule density rate.

        Marches from the surface value with the same pairing as the
        continuity constraints, so the rebuilt field satisfies them with
        the instantaneous chain-rule rate.  The rate itself depends on m
        through the convective fluxes, so a few fixed-point sweeps are
        taken; the corrections beyond the first are tiny for near-steady
        states.  Returns a new state array.
        """
        X = np.array(X, dtype=float, copy=True)
        dx = self.mesh.gas_widths
        for _ in range(sweeps):
            rate = self.chain_rho_rate(X, t)
            m = np.empty(self.Ng)
            m[0] = X[self.S, IM]
            m[1:] = m[0] - np.cumsum(rate[:-1] * dx[:-1])
            X[self.gas, IM] = m
        return X

    def algebraic(self, X, t, rho_rate=None, rho_rate_cells=None):
        """Residuals of the algebraic constraints, in the algebraic slots.

        rho_rate: target d(rho)/dt per gas cell for the interior continuity
        constraints (cells 0..Ng-2).  If omitted those rows are filled with
        the instantaneous imbalance rho_rate=0 form (steady continuity).
        """
        mdl = self.model
        g = np.zeros_like(X)
        m_sol = X[self.solid, IM]
        m_surf = X[self.S, IM]
        T_s = X[self.S, IT]
        Y_s = X[self.S, IY]
        T1 = X[self.gas, IT][0]
        Y1 = X[self.gas, IY][0]
        x1 = self.mesh.gas_centers[0]
        x_sl = self.mesh.solid_centers[-1]
        T_sl = X[self.solid, IT][-1]
        # solid mass-flow chain, anchored at the surface value
        g[self.solid, IM][:-1] = m_sol[:-1] - m_sol[1:]
        g[self.Nc - 1, IM] = m_sol[-1] - m_surf
        g[self.solid, IY] = X[self.solid, IY]
        # surface block: pyrolysis law, thermal balance, species balance
        g[self.S, IM] = m_surf - mdl.surface.mass_flux(T_s)
        lam_g = mdl.transport.lam
        lam_c = mdl.solid.lam
        g[self.S, IT] = (lam_g * (T1 - T_s) / x1
                         - lam_c * (T_s - T_sl) / (0.0 - x_sl)
                         + m_surf * mdl.q_pyro(T_s)
                         + self.forcing.beta_s * self.forcing.laser(t))
        rhoD_s = lam_g / mdl.mixture_cp(Y_s)
        g[self.S, IY] = (m_surf * (mdl.surface.Y_inj - Y_s)
                         + rhoD_s * (Y1 - Y_s) / x1)
        # gas mass flow: first face matches the surface source, interior
        # faces balance the density rate of the upstream cell
        m_gas = X[self.gas, IM]
        g[self.Nc + 1, IM] = m_gas[0] - m_surf
        dx = self.mesh.gas_widths
        rate = np.zeros(self.Ng) if rho_rate is None else rho_rate
        g[self.gas, IM][1:] = rate[:-1] + (m_gas[1:] - m_gas[:-1]) / dx[:-1]
        return g

    # ------------------------------------------------------------------
    # implicit-stage residual

    def stage_residual(self, X, t, dt, a_ii, C_n, rho_n, sum_prev_rhs,
                       sum_prev_r, alg_target=None):
        """Residual of one diagonally implicit stage.

        C_n: conserved quantities at the step start; rho_n: gas densities at
        the step start; sum_prev_rhs: sum_j<i a_ij * rhs_j over earlier
        stages (zeros for the first); sum_prev_r: matching sum of per-cell
        d(rho)/dt recovered from earlier stages.  alg_target shifts the
        non-continuity algebraic constraints (used by schemes that reflect
        the constraint residual instead of annihilating it).
        """
        P = self.forcing.pressure(t)
        res = np.empty_like(X)
        rhs = self.rhs(X, t)
        C = self.conserved(X, P)
        dm = self.diff_mask
        res[dm] = C[dm] - C_n[dm] - dt * (sum_prev_rhs[dm] + a_ii * rhs[dm])
        rho = self.gas_density(X, P)
        rate = (rho - rho_n) / (a_ii * dt) - sum_prev_r / a_ii
        g = self.algebraic(X, t, rho_rate=rate)
        if alg_target is not None:
            g = g - alg_target
        res[~dm] = g[~dm]
        return res

    def algebraic_residual_norm(self, X, t, X_ref=None):
        """Scaled norm of the non-continuity algebraic constraints at X."""
        g = self.algebraic(X, t)
        # exclude interior continuity rows (stage-form, not state-form)
        g[self.gas, IM][1:] = 0.0
        scale = np.maximum(np.abs(X if X_ref is None else X_ref), self.scales)
        return float(np.sqrt(np.mean((g[self.alg_mask] / scale[self.alg_mask]) ** 2)))

    def index1_condition(self, X, t):
        """Smallest singular value of d(constraints)/d(algebraic variables).

        A strictly positive value confirms the system is index 1 at X: the
        algebraic variables are locally determined by the constraints.
        """
        idx = np.argwhere(self.alg_mask)
        n = len(idx)
        P = self.forcing.pressure(t)
        rho0 = self.gas_density(X, P)

        def g_of(Z):
            # continuity rows in plain d(m)/dx form; the density-rate part
            # depends only on differential variables
            return self.algebraic(Z, t)[self.alg_mask]

        g0 = g_of(X)
        Jz = np.empty((n, n))
        for col, (i, v) in enumerate(idx):
            eps = np.sqrt(np.finfo(float).eps) * max(abs(X[i, v]), self.scales[v])
            Xp = X.copy()
            Xp[i, v] += eps
            Jz[:, col] = (g_of(Xp) - g0) / eps
        return float(np.linalg.svd(Jz, compute_uv=False).min())

    # ------------------------------------------------------------------
    # output

    def profile_arrays(self, X, t):
        """Tabulated profile: x, phase, m, T, Y_k, rho (rho=solid density
        in the solid, ideal-gas density in the gas, 0 at the interface)."""
        P = self.forcing.pressure(t)
        xs = self.mesh.solid_centers
        xg = self.mesh.gas_centers
        x = np.concatenate([xs, [0.0], xg])
        phase = ["solid"] * self.Nc + ["surface"] + ["gas"] * self.Ng
        rho = np.concatenate([np.full(self.Nc, self.model.solid.rho), [0.0],
                              self.gas_density(X, P)])
        return x, phase, X[:, IM].copy(), X[:, IT].copy(), X[:, 2:].copy(), rho

    def write_profile_csv(self, X, t, path_or_buf):
        x, phase, m, T, Y, rho = self.profile_arrays(X, t)
        buf = (path_or_buf if hasattr(path_or_buf, "write")
               else open(path_or_buf, "w"))
        try:
            names = ",".join(f"Y_{s.name}" for s in self.model.species)
            buf.write(f"# t = {float(t)!r}\nphase,x,m,T,{names},rho\n")
            for i in range(self.n_rows):
                ys = ",".join(repr(float(v)) for v in Y[i])
                buf.write(f"{phase[i]},{float(x[i])!r},{float(m[i])!r},"
                          f"{float(T[i])!r},{ys},{float(rho[i])!r}\n")
        finally:
            if buf is not path_or_buf:
                buf.close()
