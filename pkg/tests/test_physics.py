"""Unit tests of the physical model layer."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from propburn.physics import (
    GasSpecies,
    GasTransport,
    ModelError,
    PropellantModel,
    R_GAS,
    Reaction,
    SolidProperties,
    SurfaceKinetics,
)


def make_model(A=435.5, W=0.074, cp=1253.0, lam=0.464, T0=300.0):
    solid = SolidProperties(rho=1806.0, c=1253.0, lam=0.65, T0=T0)
    surface = SurfaceKinetics(A_p=6.07e7, T_ap=15082.0, Y_inj=np.array([1.0, 0.0]))
    species = (GasSpecies("G1", W, cp, -1.8e5), GasSpecies("G2", W, cp, -4.06e6))
    reactions = (Reaction(nu=np.array([-1.0, 1.0]), A=A, T_a=7216.0),)
    transport = GasTransport(lam=lam)
    return PropellantModel(solid=solid, surface=surface, species=species,
                           reactions=reactions, transport=transport)


# ---------------------------------------------------------------------------
# equation of state

def test_eos_density_reference_values():
    m = make_model()
    # scalar evaluation of rho = P / (R T sum Y_k/M_k)
    rho = m.density(5e6, 300.0, np.array([0.0, 1.0]))
    assert rho == pytest.approx(5e6 * 0.074 / (R_GAS * 300.0), rel=1e-12)
    assert rho == pytest.approx(148.3, rel=1e-3)
    # halved at doubled temperature
    assert m.density(5e6, 600.0, np.array([0.0, 1.0])) == pytest.approx(
        rho / 2.0, rel=1e-12)


@given(P=st.floats(1e4, 1e8), T=st.floats(200.0, 4000.0),
       y=st.floats(0.0, 1.0), s=st.floats(0.5, 2.0))
@settings(max_examples=200, deadline=None)
def test_eos_homogeneity(P, T, y, s):
    """Degree 1 in P and degree -1 in T for fixed composition."""
    m = make_model()
    Y = np.array([y, 1.0 - y])
    rho = m.density(P, T, Y)
    assert m.density(s * P, T, Y) == pytest.approx(s * rho, rel=1e-12)
    assert m.density(P, s * T, Y) == pytest.approx(rho / s, rel=1e-12)


def test_eos_rejects_bad_input():
    m = make_model()
    with pytest.raises(ModelError):
        m.density(-1.0, 300.0, np.array([1.0, 0.0]))
    with pytest.raises(ModelError):
        m.density(5e6, -300.0, np.array([1.0, 0.0]))
    with pytest.raises(ModelError):
        m.density(math.nan, 300.0, np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# pyrolysis law

def test_pyrolysis_reference_values():
    m = make_model()
    # Arrhenius evaluation and the ~1 cm/s regression-speed anchor
    flux = m.surface.mass_flux(1000.0)
    assert flux == pytest.approx(6.07e7 * math.exp(-15.082), rel=1e-12)
    assert flux / m.solid.rho == pytest.approx(0.95e-2, rel=0.02)
    assert m.surface.mass_flux(1100.0) == pytest.approx(
        6.07e7 * math.exp(-15082.0 / 1100.0), rel=1e-12)


@given(T1=st.floats(300.0, 3000.0), dT=st.floats(1e-3, 500.0))
@settings(max_examples=200, deadline=None)
def test_pyrolysis_monotone(T1, dT):
    m = make_model()
    assert m.surface.mass_flux(T1 + dT) > m.surface.mass_flux(T1)


def test_pyrolysis_vanishes_at_low_temperature():
    m = make_model()
    assert m.surface.mass_flux(1.0) == pytest.approx(0.0, abs=1e-300)
    assert m.surface.dm_dTs(1000.0) == pytest.approx(
        m.surface.mass_flux(1000.0) * 15082.0 / 1000.0**2, rel=1e-12)


# ---------------------------------------------------------------------------
# reaction rates

def test_reaction_rate_reference_value():
    # omega_G1 = -A (rho Y / M) exp(-T_a/T) M = -435.5 * 5 * exp(-4.8107)
    m = make_model(A=435.5)
    omega = m.production_rates(1500.0, np.array([0.5, 0.5]), np.array(10.0))
    expected = -435.5 * (10.0 * 0.5 / 0.074) * math.exp(-7216.0 / 1500.0) * 0.074
    assert omega[0] == pytest.approx(expected, rel=1e-12)
    assert omega[0] == pytest.approx(-17.7, rel=5e-3)
    assert omega[1] == pytest.approx(-omega[0], rel=1e-12)


def test_reaction_rate_trivial_zeros():
    m = make_model()
    assert np.all(m.production_rates(1500.0, np.array([0.0, 1.0]),
                                     np.array(10.0)) == 0.0)
    m0 = make_model(A=0.0)
    # A = 0 is rejected as nonphysical only for the surface; gas prefactor
    # zero simply freezes the chemistry
    assert np.all(m0.production_rates(1500.0, np.array([0.5, 0.5]),
                                      np.array(10.0)) == 0.0)


@given(T=st.floats(300.0, 4000.0), y=st.floats(0.0, 1.0),
       rho=st.floats(0.01, 100.0))
@settings(max_examples=200, deadline=None)
def test_reaction_rates_conserve_mass(T, y, rho):
    m = make_model()
    omega = m.production_rates(T, np.array([y, 1.0 - y]), np.array(rho))
    assert abs(omega.sum()) <= 1e-12 * max(1.0, np.abs(omega).max())


def test_reversible_reaction_equilibrates():
    solid = SolidProperties(rho=1806.0, c=1253.0, lam=0.65, T0=300.0)
    surface = SurfaceKinetics(A_p=6.07e7, T_ap=15082.0, Y_inj=np.array([1.0, 0.0]))
    species = (GasSpecies("A", 0.074, 1253.0, 0.0),
               GasSpecies("B", 0.074, 1253.0, 0.0))
    rx = Reaction(nu=np.array([-1.0, 1.0]), A=100.0, T_a=0.0,
                  reversible=True, A_rev=100.0, T_a_rev=0.0)
    m = PropellantModel(solid=solid, surface=surface, species=species,
                        reactions=(rx,), transport=GasTransport(lam=0.5))
    omega = m.production_rates(1000.0, np.array([0.5, 0.5]), np.array(1.0))
    assert np.allclose(omega, 0.0, atol=1e-14)


# ---------------------------------------------------------------------------
# thermodynamics

def test_enthalpy_identities():
    m = make_model()
    # at T=0 the enthalpy reduces to the formation enthalpy
    assert m.enthalpy(0.0, np.array([1.0, 0.0])) == pytest.approx(-1.8e5)
    # constant-c_p increments
    dh = m.enthalpy(600.0, np.array([1.0, 0.0])) - m.enthalpy(
        300.0, np.array([1.0, 0.0]))
    assert dh == pytest.approx(1253.0 * 300.0, rel=1e-12)
    # mixture linearity
    h_mix = m.enthalpy(500.0, np.array([0.5, 0.5]))
    h_pure = 0.5 * (m.enthalpy(500.0, np.array([1.0, 0.0]))
                    + m.enthalpy(500.0, np.array([0.0, 1.0])))
    assert h_mix == pytest.approx(h_pure, rel=1e-12)


def test_q_pyro_properties():
    m = make_model()
    # equal c_p on both sides of the interface: Q_pyro is T-independent
    assert m.q_pyro(900.0) == pytest.approx(1.8e5, rel=1e-12)
    assert m.q_pyro(1200.0) == pytest.approx(m.q_pyro(700.0), rel=1e-12)


def test_unity_lewis_transport():
    m = make_model()
    Y = np.array([0.3, 0.7])
    assert m.rho_D(5e6, 1500.0, Y) * m.mixture_cp(Y) == pytest.approx(
        m.transport.lam, rel=1e-12)


def test_heat_release_sign():
    m = make_model()
    omega = m.production_rates(2000.0, np.array([0.5, 0.5]), np.array(5.0))
    # G1 -> G2 is exothermic (more negative formation enthalpy)
    assert m.heat_release(omega) > 0.0


def test_burnt_mass_fractions():
    m = make_model()
    assert np.allclose(m.burnt_mass_fractions(), [0.0, 1.0], atol=1e-12)


# ---------------------------------------------------------------------------
# validation

def test_constructor_validation():
    with pytest.raises(ModelError):
        SolidProperties(rho=-1.0, c=1253.0, lam=0.65, T0=300.0)
    with pytest.raises(ModelError):
        SurfaceKinetics(A_p=6.07e7, T_ap=15082.0, Y_inj=np.array([0.5, 0.4]))
    with pytest.raises(ModelError):
        GasSpecies("X", -0.074, 1253.0, 0.0)
    # mass-conservation check on stoichiometry
    solid = SolidProperties(rho=1806.0, c=1253.0, lam=0.65, T0=300.0)
    surface = SurfaceKinetics(A_p=6.07e7, T_ap=15082.0,
                              Y_inj=np.array([1.0, 0.0]))
    species = (GasSpecies("A", 0.074, 1253.0, 0.0),
               GasSpecies("B", 0.030, 1253.0, 0.0))
    with pytest.raises(ModelError):
        PropellantModel(solid=solid, surface=surface, species=species,
                        reactions=(Reaction(nu=np.array([-1.0, 1.0]),
                                            A=1.0, T_a=0.0),),
                        transport=GasTransport(lam=0.5))
