"""Time integration: controller behavior, failure handling, histories."""

import io
import math

import numpy as np
import pytest

import propburn.integrators as integrators
from propburn.discretization import IM, IT
from propburn.integrators import (
    IntegrationError,
    RunHistory,
    StepController,
    StepRecord,
    consistent_initialization,
    integrate,
)
from propburn.newton import NewtonError, NewtonOptions


def test_controller_combine_norms():
    c_l2 = StepController(norm="l2")
    c_rms = StepController(norm="rms")
    assert c_l2.combine(16.0, 4) == pytest.approx(4.0)
    assert c_rms.combine(16.0, 4) == pytest.approx(2.0)


def test_zero_span_returns_initial(coarse_disc, coarse_steady_state):
    X, hist = integrate(coarse_disc, coarse_steady_state, (0.0, 0.0),
                        consistent_init=False)
    assert hist.n_accepted == 0 and hist.failure is None
    assert np.array_equal(X, coarse_steady_state)


# ---------------------------------------------------------------------------
# controller dynamics, probed through a stubbed step function


def _stub_step(err_fn):
    def fake(disc, X_n, t_n, dt, tab, newton_opts, cache, ctrl):
        return X_n.copy(), err_fn(t_n, dt), {
            "newton_iters": 1, "jacobian_evals": 0,
            "constraint_norm": 0.0}
    return fake


def test_rejection_factor_worked_example(coarse_disc, coarse_steady_state,
                                         monkeypatch):
    """err=8 with a second-order embedded estimate shrinks dt by 0.45."""
    monkeypatch.setattr(integrators, "dirk_step", _stub_step(lambda t, dt: 8.0))
    ctrl = StepController(dt_init=1e-7)
    _, hist = integrate(coarse_disc, coarse_steady_state, (0.0, 1.0),
                        method="esdirk32a", controller=ctrl,
                        consistent_init=False, raise_on_failure=False)
    dts = hist.series("dt", accepted_only=False)
    assert hist.n_accepted == 0
    ratios = dts[1:] / dts[:-1]
    assert np.allclose(ratios, 0.9 * 8.0 ** (-1.0 / 3.0), rtol=1e-12)
    assert ratios[0] == pytest.approx(0.45, abs=0.005)
    # the shrinking sequence terminates in a step-size underflow
    assert "underflow" in hist.failure


def test_growth_factor_clamped(coarse_disc, coarse_steady_state, monkeypatch):
    monkeypatch.setattr(integrators, "dirk_step",
                        _stub_step(lambda t, dt: 1e-30))
    ctrl = StepController(dt_init=1e-9, factor_max=5.0, dt_max=math.inf)
    _, hist = integrate(coarse_disc, coarse_steady_state, (0.0, 1.0),
                        method="esdirk32a", controller=ctrl,
                        consistent_init=False, raise_on_failure=False,
                        max_steps=40)
    dts = hist.series("dt")
    ratios = dts[1:] / dts[:-1]
    # growth saturates at factor_max until the horizon clips the last steps
    assert np.all(ratios <= 5.0 + 1e-12)
    assert np.any(np.isclose(ratios, 5.0, rtol=1e-9))


def test_shrink_factor_clamped(coarse_disc, coarse_steady_state, monkeypatch):
    monkeypatch.setattr(integrators, "dirk_step",
                        _stub_step(lambda t, dt: 1e12))
    ctrl = StepController(dt_init=1e-7)
    _, hist = integrate(coarse_disc, coarse_steady_state, (0.0, 1.0),
                        method="esdirk32a", controller=ctrl,
                        consistent_init=False, raise_on_failure=False)
    dts = hist.series("dt", accepted_only=False)
    assert np.allclose(dts[1:] / dts[:-1], 0.2, rtol=1e-12)


def test_newton_failure_halves_dt_then_underflows(coarse_disc,
                                                  coarse_steady_state,
                                                  monkeypatch):
    def always_fail(*args, **kwargs):
        raise NewtonError("stub failure")

    monkeypatch.setattr(integrators, "dirk_step", always_fail)
    with pytest.raises(IntegrationError) as exc_info:
        integrate(coarse_disc, coarse_steady_state, (0.0, 1.0),
                  controller=StepController(dt_init=1e-7),
                  consistent_init=False)
    assert exc_info.value.kind == "dt_underflow"
    # non-raising variant records the same failure instead
    _, hist = integrate(coarse_disc, coarse_steady_state, (0.0, 1.0),
                        controller=StepController(dt_init=1e-7),
                        consistent_init=False, raise_on_failure=False)
    assert "underflow" in hist.failure
    dts = hist.series("dt", accepted_only=False)
    assert np.allclose(dts[1:] / dts[:-1], 0.5, rtol=1e-12)


def test_fixed_dt_newton_failure_raises_newton_kind(coarse_disc,
                                                    coarse_steady_state,
                                                    monkeypatch):
    def always_fail(*args, **kwargs):
        raise NewtonError("stub failure")

    monkeypatch.setattr(integrators, "dirk_step", always_fail)
    with pytest.raises(IntegrationError) as exc_info:
        integrate(coarse_disc, coarse_steady_state, (0.0, 1.0),
                  fixed_dt=1e-6, consistent_init=False)
    assert exc_info.value.kind == "newton"


def test_max_steps_kind(coarse_disc, coarse_steady_state, monkeypatch):
    monkeypatch.setattr(integrators, "dirk_step", _stub_step(lambda t, dt: 0.5))
    with pytest.raises(IntegrationError) as exc_info:
        integrate(coarse_disc, coarse_steady_state, (0.0, 1.0),
                  controller=StepController(dt_init=1e-9, dt_max=1e-9),
                  consistent_init=False, max_steps=10)
    assert exc_info.value.kind == "max_steps"


# ---------------------------------------------------------------------------
# consistent initialization


def test_consistent_initialization_keeps_steady_state(coarse_disc,
                                                      coarse_steady_state):
    X = consistent_initialization(coarse_disc, coarse_steady_state, 0.0)
    scale = np.maximum(np.abs(coarse_steady_state), coarse_disc.scales)
    assert np.abs((X - coarse_steady_state) / scale).max() <= 1e-5


def test_consistent_initialization_repairs_broken_constraints(
        coarse_disc, coarse_steady_state):
    d = coarse_disc
    X0 = coarse_steady_state.copy()
    X0[:, IM] *= 1.05          # break pyrolysis and the mass-flow chains
    assert d.algebraic_residual_norm(X0, 0.0) > 1e-4
    X = consistent_initialization(d, X0, 0.0)
    assert d.algebraic_residual_norm(X, 0.0) <= 1e-5
    # differential variables are essentially untouched by the micro-step
    assert np.abs(X[d.solid, IT] - X0[d.solid, IT]).max() <= 1e-3


# ---------------------------------------------------------------------------
# real integrations on the coarse problem


def test_hold_steady_state(coarse_disc, coarse_steady_state):
    X, hist = integrate(coarse_disc, coarse_steady_state, (0.0, 1e-4),
                        method="esdirk43b",
                        controller=StepController(rtol=1e-5, atol=1e-6))
    assert hist.failure is None
    T_s0 = coarse_steady_state[coarse_disc.S, IT]
    assert X[coarse_disc.S, IT] == pytest.approx(T_s0, rel=1e-4)
    # constraints hold at every accepted step
    cn = hist.series("constraint_norm")
    cn = cn[np.isfinite(cn)]
    assert cn.size > 0 and cn.max() <= 10 * NewtonOptions().tol


def test_snapshots_and_save_times(coarse_disc, coarse_steady_state):
    times = [2e-5, 5e-5]
    X, hist = integrate(coarse_disc, coarse_steady_state, (0.0, 1e-4),
                        method="esdirk32a", save_times=times,
                        store_states=True)
    ts = [t for t, _ in hist.snapshots]
    for want in times:
        assert any(abs(t - want) < 1e-12 for t in ts)
    # store_states snapshots every accepted step plus the initial state
    assert len(hist.snapshots) == hist.n_accepted + 1 + len(times)
    for _, snap in hist.snapshots:
        assert snap.shape == coarse_steady_state.shape


def test_fixed_dt_run(coarse_disc, coarse_steady_state):
    X, hist = integrate(coarse_disc, coarse_steady_state, (0.0, 2e-5),
                        method="ie", fixed_dt=5e-6)
    assert hist.n_rejected == 0
    dts = hist.series("dt")
    assert np.allclose(dts, 5e-6)
    assert hist.series("t")[-1] == pytest.approx(2e-5, rel=1e-12)


def test_ckn_constraint_reflection(coarse_disc, coarse_steady_state):
    """The trapezoidal scheme relies on constraint reflection; residuals
    stay bounded instead of accumulating over the run."""
    d = coarse_disc
    X, hist = integrate(d, coarse_steady_state, (0.0, 5e-5),
                        method="ckn", fixed_dt=1e-6)
    assert hist.failure is None
    assert d.algebraic_residual_norm(X, 5e-5) <= 1e-5


# ---------------------------------------------------------------------------
# run history


def test_history_series_and_csv(tmp_path):
    hist = RunHistory()
    hist.append(StepRecord(t=1e-6, dt=1e-6, accepted=True, err=0.5,
                           newton_iters=3, jacobian_evals=1, T_s=900.0,
                           m_surf=10.0, pressure=50e5, constraint_norm=1e-9,
                           cfl=0.1))
    hist.append(StepRecord(t=2e-6, dt=1e-6, accepted=False, err=2.0,
                           newton_iters=5, jacobian_evals=1))
    hist.append(StepRecord(t=2e-6, dt=5e-7, accepted=True, err=0.8,
                           newton_iters=2, jacobian_evals=0, T_s=901.0,
                           m_surf=10.1, pressure=50e5, constraint_norm=2e-9,
                           cfl=0.05))
    assert hist.n_accepted == 2 and hist.n_rejected == 1
    assert np.allclose(hist.series("t"), [1e-6, 2e-6])
    assert len(hist.series("err", accepted_only=False)) == 3
    buf = io.StringIO()
    hist.to_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].startswith("t,dt,accepted")
    assert len(lines) == 4
    assert [ln.split(",")[2] for ln in lines[1:]] == ["1", "0", "1"]


def test_surface_interpolant():
    hist = RunHistory()
    for i, t in enumerate(np.linspace(0.0, 1.0, 11)):
        hist.append(StepRecord(t=float(t), dt=0.1, accepted=True, err=0.1,
                               newton_iters=1, jacobian_evals=0,
                               T_s=900.0 + 10.0 * t))
    f = hist.surface_interpolant("T_s")
    assert f(0.55) == pytest.approx(905.5, rel=1e-10)
