"""Steady-state oracles: shooting, relaxation, and their agreement."""

import numpy as np
import pytest

from propburn.discretization import Discretization, Forcing, IM, IT
from propburn.steady import (
    SteadyError,
    SteadySolution,
    preset_steady,
    steady_by_relaxation,
    steady_by_shooting,
    steady_sensitivities,
)

P_REF = 50e5


def test_preset_steady_baseline_values(baseline_steady, baseline_model):
    s = baseline_steady
    assert s.P == pytest.approx(P_REF)
    assert s.T0 == pytest.approx(300.0)
    # self-consistency of the stored metadata
    assert s.m == pytest.approx(s.c * baseline_model.solid.rho, rel=1e-10)
    assert s.m == pytest.approx(baseline_model.surface.mass_flux(s.T_s),
                                rel=1e-8)
    sol = baseline_model.solid
    assert s.solid_decay == pytest.approx(s.m * sol.c / sol.lam, rel=1e-10)
    # regression speed near the ~1 cm/s design point
    assert 0.5e-2 < s.c < 2e-2


def test_preset_steady_unstable_values(unstable_model):
    s = preset_steady("unstable")
    # this configuration is constrained to exactly 1 cm/s at 50 atm
    assert s.c == pytest.approx(1.0e-2, rel=1e-4)
    assert s.T_s == pytest.approx(976.0, abs=1.0)
    assert s.flame_temperature == pytest.approx(3540.0, abs=15.0)


def test_steady_profiles_are_physical(baseline_steady):
    s = baseline_steady
    assert np.all(np.diff(s.x_gas) > 0)
    assert s.x_gas[0] >= 0.0
    # temperature rises monotonically from the surface to the flame
    assert s.T_gas[0] == pytest.approx(s.T_s, rel=1e-6)
    assert np.all(np.diff(s.T_gas) > -1e-6 * s.flame_temperature)
    # reactant fully consumed at the outflow
    assert s.Y_gas[-1, 0] == pytest.approx(0.0, abs=1e-6)
    assert np.allclose(s.Y_gas.sum(axis=1), 1.0, atol=1e-9)


def test_solid_profile_analytic(baseline_steady):
    s = baseline_steady
    assert s.solid_temperature(0.0) == pytest.approx(s.T_s)
    assert s.solid_temperature(-1.0) == pytest.approx(s.T0)
    # exponential decay: equal ratios over equal spacings
    d = 1.0 / s.solid_decay
    v = (s.solid_temperature(np.array([-d, -2 * d, -3 * d])) - s.T0)
    assert v[1] / v[0] == pytest.approx(v[2] / v[1], rel=1e-12)


def test_flame_temperature_enthalpy_balance(baseline_steady, baseline_model):
    """Overall energy balance: the flame enthalpy equals the injected
    enthalpy shifted by the pyrolysis heat."""
    s = baseline_steady
    m = baseline_model
    h_flame = m.enthalpy(s.flame_temperature, s.Y_gas[-1])
    # injected enthalpy, raised by the pyrolysis heat, lowered by the
    # conduction that preheats the solid from T0 to T_s
    h_in = (m.enthalpy(s.T_s, m.surface.Y_inj) + m.q_pyro(s.T_s)
            - m.solid.c * (s.T_s - s.T0))
    assert h_flame == pytest.approx(h_in, rel=1e-3)


def test_csv_roundtrip(baseline_steady):
    text = baseline_steady.to_csv_text()
    back = SteadySolution.from_csv_text(text)
    assert back.P == baseline_steady.P
    assert back.T_s == baseline_steady.T_s
    assert np.array_equal(back.x_gas, baseline_steady.x_gas)
    assert np.array_equal(back.Y_gas, baseline_steady.Y_gas)
    assert np.array_equal(back.Y_s, baseline_steady.Y_s)


def test_shooting_reproduces_preset(baseline_model, baseline_steady):
    sol = steady_by_shooting(baseline_model, P_REF, tol=1e-6)
    assert sol.c == pytest.approx(baseline_steady.c, rel=1e-5)
    assert sol.T_s == pytest.approx(baseline_steady.T_s, rel=1e-6)
    assert sol.flame_temperature == pytest.approx(
        baseline_steady.flame_temperature, rel=1e-4)


def test_shooting_pressure_monotonicity(baseline_model, baseline_steady):
    """Burning rate increases with pressure (positive pressure exponent)."""
    hi = steady_by_shooting(baseline_model, 1.2 * P_REF, tol=1e-6)
    assert hi.m > baseline_steady.m
    assert hi.T_s > baseline_steady.T_s


def test_relaxation_agrees_with_shooting(baseline_model, coarse_mesh,
                                         baseline_steady, coarse_steady_state):
    d = Discretization(baseline_model, coarse_mesh, Forcing.constant(P_REF))
    X = coarse_steady_state
    # surface temperature matches the shooting oracle to the coarse-mesh
    # truncation level
    assert X[d.S, IT] == pytest.approx(baseline_steady.T_s, rel=2e-3)
    assert X[d.S, IM] == pytest.approx(baseline_steady.m, rel=2e-2)
    # gas temperature profile tracks the oracle
    Tg = np.interp(coarse_mesh.gas_centers, baseline_steady.x_gas,
                   baseline_steady.T_gas)
    rel = np.abs(X[d.gas, IT] - Tg) / baseline_steady.flame_temperature
    assert rel.max() < 0.05


def test_relaxation_is_converged(baseline_model, coarse_mesh,
                                 coarse_steady_state):
    """Re-relaxing from the fixed point terminates immediately and the
    per-unit-time state change is at the convergence threshold."""
    disc, X, rates = steady_by_relaxation(
        baseline_model, coarse_mesh, P_REF, X0=coarse_steady_state,
        return_history=True)
    assert rates[-1][2] < 1e-10
    scale = np.maximum(np.abs(X), disc.scales)
    assert np.abs((X - coarse_steady_state) / scale).max() < 1e-6


def test_sensitivities_baseline(baseline_model):
    sens = steady_sensitivities(baseline_model, P_REF, dT0=2.0)
    # pressure exponent of the quasi-steady burning law
    assert sens["n"] == pytest.approx(0.497, abs=0.01)
    assert 0.0 < sens["r"] < 1.0
    assert sens["k"] > 0.0
    assert sens["k"] == pytest.approx(
        (sens["base"].T_s - baseline_model.solid.T0) * sens["sigma_p"],
        rel=1e-12)
    assert sens["B"] == pytest.approx(1.0 / sens["k"], rel=1e-12)
    s = sens["base"]
    assert sens["A"] == pytest.approx(
        (s.T_s - baseline_model.solid.T0)
        * baseline_model.surface.T_ap / s.T_s**2, rel=1e-12)


def test_shooting_rejects_unburnable_conditions(baseline_model):
    with pytest.raises(SteadyError):
        steady_by_shooting(baseline_model, 1.0)   # 1 Pa cannot sustain a flame
