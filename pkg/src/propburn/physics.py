"""Physical model of the propellant: solid, surface kinetics, gas mixture.

All quantities are SI. Formation enthalpies are referenced to T = 0 K,
not the usual 298.15 K: h_k(T) = dh_f_k + c_p_k * T for constant heat
capacities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

R_GAS = 8.314462618  # J/(mol K)


class ModelError(ValueError):
    """Invalid physical parameter set."""


@dataclass(frozen=True)
class SolidProperties:
    rho: float          # density [kg/m^3]
    c: float            # heat capacity [J/(kg K)]
    lam: float          # thermal conductivity [W/(m K)]
    T0: float           # far-field temperature [K]
    dh_f: float = 0.0   # formation enthalpy at 0 K [J/kg]

    def __post_init__(self):
        for name in ("rho", "c", "lam", "T0"):
            if not getattr(self, name) > 0.0:
                raise ModelError(f"solid.{name} must be > 0")

    def enthalpy(self, T):
        return self.dh_f + self.c * T

    @property
    def thermal_diffusivity(self):
        return self.lam / (self.rho * self.c)


@dataclass(frozen=True)
class SurfaceKinetics:
    A_p: float                  # pre-exponential [kg/(s m^2)]
    T_ap: float                 # activation temperature [K]
    Y_inj: np.ndarray           # injected mass fractions, sums to 1

    def __post_init__(self):
        if self.A_p <= 0 or self.T_ap <= 0:
            raise ModelError("A_p and T_ap must be > 0")
        y = np.asarray(self.Y_inj, dtype=float)
        object.__setattr__(self, "Y_inj", y)
        if np.any(y < 0) or np.any(y > 1) or abs(y.sum() - 1.0) > 1e-10:
            raise ModelError("Y_inj must lie in [0,1] and sum to 1")

    def mass_flux(self, T_s):
        """Pyrolysis mass flow rate m = A_p exp(-T_ap/T_s), P-independent."""
        T_s = np.asarray(T_s, dtype=float)
        if np.any(T_s <= 0):
            raise ModelError("surface temperature must be > 0")
        return self.A_p * np.exp(-self.T_ap / T_s)

    def dm_dTs(self, T_s):
        return self.mass_flux(T_s) * self.T_ap / T_s**2


@dataclass(frozen=True)
class GasSpecies:
    name: str
    molar_mass: float   # [kg/mol]
    c_p: float          # [J/(kg K)]
    dh_f: float         # formation enthalpy at 0 K [J/kg]

    def __post_init__(self):
        if self.molar_mass <= 0 or self.c_p <= 0:
            raise ModelError(f"species {self.name}: molar_mass and c_p must be > 0")


@dataclass(frozen=True)
class Reaction:
    """One global gas-phase reaction with mass-action Arrhenius kinetics.

    nu holds the signed stoichiometric coefficients over all species
    (negative for reactants).  The forward rate is
    A exp(-T_a/T) * prod_k [X_k]^|nu_k| over reactants; an optional
    explicit reverse Arrhenius pair makes the reaction reversible.
    """
    nu: np.ndarray
    A: float
    T_a: float
    reversible: bool = False
    A_rev: float = 0.0
    T_a_rev: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "nu", np.asarray(self.nu, dtype=float))
        if self.reversible and self.A_rev <= 0:
            raise ModelError("reversible reaction needs A_rev > 0")


@dataclass(frozen=True)
class GasTransport:
    lam: float                      # thermal conductivity [W/(m K)]
    unity_lewis: bool = True
    D_matrix: np.ndarray | None = None  # [m^2/s], used when unity_lewis=False

    def __post_init__(self):
        if self.lam <= 0:
            raise ModelError("gas thermal conductivity must be > 0")
        if not self.unity_lewis and self.D_matrix is None:
            raise ModelError("constant-matrix diffusion needs D_matrix")


@dataclass(frozen=True)
class PropellantModel:
    solid: SolidProperties
    surface: SurfaceKinetics
    species: tuple
    reactions: tuple
    transport: GasTransport
    name: str = ""
    _molar_mass: np.ndarray = field(init=False, repr=False)
    _c_p: np.ndarray = field(init=False, repr=False)
    _dh_f: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.species:
            raise ModelError("at least one gas species required")
        if len(self.surface.Y_inj) != len(self.species):
            raise ModelError("Y_inj length must match species count")
        M = np.array([s.molar_mass for s in self.species])
        cp = np.array([s.c_p for s in self.species])
        dh = np.array([s.dh_f for s in self.species])
        object.__setattr__(self, "_molar_mass", M)
        object.__setattr__(self, "_c_p", cp)
        object.__setattr__(self, "_dh_f", dh)
        for j, r in enumerate(self.reactions):
            if len(r.nu) != len(self.species):
                raise ModelError(f"reaction {j}: stoichiometry length mismatch")
            if abs(float(r.nu @ M)) > 1e-12 * float(np.abs(r.nu) @ M):
                raise ModelError(f"reaction {j} does not conserve mass")

    @property
    def n_species(self):
        return len(self.species)

    @property
    def molar_masses(self):
        return self._molar_mass

    # -- gas state functions; T may be scalar or (n,), Y of shape (..., ne) --

    def density(self, P, T, Y):
        """Ideal-gas density rho = P / (R T sum_k Y_k/M_k)."""
        P = np.asarray(P, dtype=float)
        T = np.asarray(T, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if np.any(~np.isfinite(P)) or np.any(~np.isfinite(T)) or np.any(~np.isfinite(Y)):
            raise ModelError("non-finite input to equation of state")
        if np.any(P <= 0) or np.any(T <= 0):
            raise ModelError("P and T must be > 0")
        inv_M = (Y / self._molar_mass).sum(axis=-1)
        return P / (R_GAS * T * inv_M)

    def species_enthalpies(self, T):
        """Per-species h_k(T) = dh_f_k + c_p_k T, shape (..., ne)."""
        T = np.asarray(T, dtype=float)
        return self._dh_f + np.multiply.outer(T, self._c_p)

    def enthalpy(self, T, Y):
        """Mixture specific enthalpy h = sum_k Y_k h_k(T)."""
        return (np.asarray(Y) * self.species_enthalpies(T)).sum(axis=-1)

    def mixture_cp(self, Y):
        return (np.asarray(Y) * self._c_p).sum(axis=-1)

    def production_rates(self, T, Y, rho):
        """Volumetric species production rates [kg/(m^3 s)], shape (..., ne).

        Mass conserving by construction: sum_k omega_k = 0 for each state.
        """
        T = np.asarray(T, dtype=float)
        Y = np.asarray(Y, dtype=float)
        rho = np.asarray(rho, dtype=float)
        conc = rho[..., None] * Y / self._molar_mass        # [mol/m^3]
        omega = np.zeros_like(Y)
        for r in self.reactions:
            rate = r.A * np.exp(-r.T_a / T)
            for k in np.nonzero(r.nu < 0)[0]:
                rate = rate * np.maximum(conc[..., k], 0.0) ** (-r.nu[k])
            if r.reversible:
                rrev = r.A_rev * np.exp(-r.T_a_rev / T)
                for k in np.nonzero(r.nu > 0)[0]:
                    rrev = rrev * np.maximum(conc[..., k], 0.0) ** (r.nu[k])
                rate = rate - rrev
            omega += np.multiply.outer(rate, r.nu * self._molar_mass)
        return omega

    def heat_release(self, omega):
        """-sum_k dh_f_k omega_k, the chemical heat release [W/m^3]."""
        return -(omega * self._dh_f).sum(axis=-1)

    def rho_D(self, P, T, Y):
        """rho*D under unity Lewis: lambda / c_p(Y).  Scalar per state."""
        if self.transport.unity_lewis:
            return self.transport.lam / self.mixture_cp(Y)
        raise ModelError("rho_D is only defined for unity-Lewis transport")

    def diffusion_flux(self, P, T, Y_left, Y_right, dx, T_face=None, Y_face=None):
        """Diffusive species flux J_k = -rho D dY_k/dx at a face.

        Positive J_k transports species k toward -x (Fickian sign).
        For unity Lewis, rho D = lambda/c_p evaluated at the face state.
        """
        grad = (np.asarray(Y_right) - np.asarray(Y_left)) / dx
        if Y_face is None:
            Y_face = 0.5 * (np.asarray(Y_left) + np.asarray(Y_right))
        if self.transport.unity_lewis:
            rd = self.transport.lam / self.mixture_cp(Y_face)
            return -np.asarray(rd)[..., None] * grad
        if T_face is None:
            T_face = T
        rho = self.density(P, T_face, Y_face)
        return -np.asarray(rho)[..., None] * (grad @ self.transport.D_matrix.T)

    def q_pyro(self, T_s):
        """Heat of the surface reaction: solid minus injected-gas enthalpy at T_s.

        Positive Q releases heat at the interface in the thermal balance.
        """
        return self.solid.enthalpy(T_s) - self.enthalpy(T_s, self.surface.Y_inj)

    def burnt_mass_fractions(self):
        """Composition after complete conversion of the injected gas.

        Advances each irreversible reaction to the extent permitted by its
        limiting reactant, repeatedly, until none can proceed further.
        """
        Y = np.array(self.surface.Y_inj, dtype=float)
        for _ in range(8 * max(1, len(self.reactions))):
            progressed = False
            for r in self.reactions:
                if r.reversible:
                    continue
                dY = r.nu * self._molar_mass
                react = r.nu < 0
                xi = float(np.min(Y[react] / -dY[react]))
                if xi > 1e-14:
                    Y = Y + dY * xi
                    progressed = True
            if not progressed:
                break
        Y = np.clip(Y, 0.0, None)
        return Y / Y.sum()

    def adiabatic_flame_enthalpy(self):
        """Far-field gas enthalpy implied by global conservation: h_c(T0)."""
        return self.solid.enthalpy(self.solid.T0)
