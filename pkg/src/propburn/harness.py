"""Scenario runner and campaign harness.

Turns a small declarative configuration into a full simulation run with
CSV artifacts, and provides the work-precision sweep machinery used to
compare integration methods.
"""

from __future__ import annotations

import configparser
import math
import os
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .analysis import envelope_and_growth, spectral_peaks
from .config import load_model, preset_model
from .discretization import Discretization, Forcing
from .integrators import IntegrationError, StepController, integrate
from .mesh import StaggeredMesh, preset_mesh
from .newton import NewtonOptions
from .steady import SteadySolution, preset_steady, steady_by_relaxation, \
    steady_by_shooting
from .tableaux import get_tableau

SCENARIOS = ("steady", "pressure_step", "pressure_oscillation", "ignition",
             "limit_cycle", "convergence_study")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Declarative description of one simulation run.

    `model` and `mesh` accept either a preset name or a file path; `mode`
    selects fixed-step or error-adaptive integration.  Scenario-specific
    fields (laser flux, forcing frequency, ...) are ignored by scenarios
    that do not use them.  Fully deterministic: no seeds anywhere.
    """
    scenario: str = "steady"
    model: str = "baseline"
    mesh: str = ""                   # default chosen per scenario
    method: str = "esdirk54a"
    mode: str = "adaptive"           # "adaptive" | "fixed_dt"
    rtol: float = 1e-5
    atol: float = 1e-6
    dt: float = 0.0                  # fixed_dt mode
    variation_bound: float = 1e-2    # IE/CKN adaptive knob
    dt_max: float = 0.0              # 0 -> scenario default
    dt_init: float = 1e-7
    newton_tol: float = 1e-8
    t_end: float = 0.0               # 0 -> scenario default
    pressure: float = 50e5
    pressure_initial: float = 0.0    # pressure_step: steady at this P first
    frequency: float = 100.0         # pressure_oscillation [Hz]
    amplitude: float = 1e-3          # relative pressure amplitude
    laser_flux: float = 1e6          # ignition [W/m^2]
    beta_s: float = 0.5              # surface-absorbed fraction
    perturbation: float = 1e-3       # limit_cycle relative pressure offset
    out: str = ""                    # output directory ("" -> no artifacts)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"choose from {SCENARIOS}")
        if self.mode not in ("adaptive", "fixed_dt"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "fixed_dt" and self.dt <= 0.0:
            raise ConfigError("fixed_dt mode requires dt > 0")
        if self.mode == "adaptive" and (self.rtol <= 0 or self.atol <= 0):
            raise ConfigError("adaptive mode requires positive rtol and atol")
        get_tableau(self.method)   # raises on unknown method

    @classmethod
    def from_file(cls, path):
        """Load a [scenario] section from an INI file.

        A `model` value may name a preset or point to a model INI file
        (relative paths resolved against the config location).
        """
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path!r}")
        if "scenario" not in cp:
            raise ConfigError(f"{path}: missing [scenario] section")
        sec = cp["scenario"]
        kwargs = {}
        valid = {f.name: f.type for f in fields(cls)}
        for key, raw in sec.items():
            if key not in valid:
                raise ConfigError(f"{path}: unknown key {key!r}")
            kwargs[key] = raw if valid[key] is str else float(raw)
        cfg = cls(**kwargs)
        if cfg.model not in ("baseline", "unstable") and not \
                os.path.isabs(cfg.model):
            cfg = replace(cfg, model=os.path.join(os.path.dirname(path),
                                                  cfg.model))
        return cfg


@dataclass
class RunResult:
    config: ScenarioConfig
    summary: dict
    history: object = None
    disc: Discretization = None
    X_end: np.ndarray = None
    steady: SteadySolution = None


def _resolve_model(name):
    if name in ("baseline", "unstable"):
        return preset_model(name)
    return load_model(name)


def _resolve_mesh(cfg, default):
    name = cfg.mesh or default
    if name in ("ignition", "limit_cycle") or name.startswith("convergence"):
        return preset_mesh(name)
    if os.path.exists(name):
        return StaggeredMesh.from_csv(name)
    raise ConfigError(f"unknown mesh {name!r}")


def _resolve_steady(cfg, model, P):
    """Steady solution at pressure P, from the bundled data when possible."""
    if cfg.model in ("baseline", "unstable") and abs(P - 50e5) < 1e-9 * 50e5:
        return preset_steady(cfg.model)
    return steady_by_shooting(model, P)


def _controller(cfg, tab, t_end):
    dt_max = cfg.dt_max if cfg.dt_max > 0 else min(0.1, t_end)
    return StepController(rtol=cfg.rtol, atol=cfg.atol, dt_max=dt_max,
                          dt_init=min(cfg.dt_init, dt_max),
                          variation_bound=cfg.variation_bound)


def _integrate(cfg, disc, X0, t_end, **kw):
    tab = get_tableau(cfg.method)
    ctrl = _controller(cfg, tab, t_end)
    newton = NewtonOptions(tol=cfg.newton_tol)
    fixed_dt = cfg.dt if cfg.mode == "fixed_dt" else None
    t0 = time.perf_counter()
    X_end, hist = integrate(disc, X0, (0.0, t_end), method=cfg.method,
                            controller=ctrl, newton=newton,
                            fixed_dt=fixed_dt, **kw)
    cpu = time.perf_counter() - t0
    return X_end, hist, cpu


def _base_summary(cfg, hist, cpu):
    s = {
        "scenario": cfg.scenario, "model": cfg.model, "method": cfg.method,
        "mode": cfg.mode, "cpu_time_s": cpu,
        "n_accepted": hist.n_accepted, "n_rejected": hist.n_rejected,
        "newton_iters": int(np.sum(hist.series("newton_iters",
                                               accepted_only=False))),
        "jacobian_evals": int(np.sum(hist.series("jacobian_evals",
                                                 accepted_only=False))),
    }
    if cfg.mode == "adaptive":
        s["knob"] = cfg.rtol if get_tableau(cfg.method).b_hat is not None \
            else cfg.variation_bound
    else:
        s["knob"] = cfg.dt
    if hist.records:
        s["T_s_final"] = hist.series("T_s")[-1]
        s["m_surf_final"] = hist.series("m_surf")[-1]
    if getattr(hist, "failure", None):
        s["failure"] = hist.failure
    return s


def ignition_time(hist, threshold=1000.0):
    """First time the surface temperature exceeds `threshold` (K)."""
    t = hist.series("t")
    T_s = hist.series("T_s")
    above = np.nonzero(T_s > threshold)[0]
    if len(above) == 0:
        return math.nan
    i = above[0]
    if i == 0:
        return float(t[0])
    from scipy.optimize import brentq
    spline = hist.surface_interpolant("T_s")
    return float(brentq(lambda x: spline(x) - threshold, t[i - 1], t[i]))


def perturbed_steady_state(model, mesh, steady, P, perturbation,
                           newton_tol=1e-8):
    """Relax to the steady state at P·(1+perturbation) starting from
    `steady` (the release-protocol preparation phase).  Implicit Euler
    with growing steps; returns (disc_at_P, X_perturbed)."""
    disc_p = Discretization(model, mesh,
                            Forcing.constant(P * (1.0 + perturbation)))
    X0 = steady.to_state(disc_p)
    _, X = steady_by_relaxation(model, mesh, P * (1.0 + perturbation),
                                X0=X0, tol=1e-9, dt_max=1.0,
                                newton=NewtonOptions(tol=newton_tol))
    return X


def run_scenario(cfg):
    """Run one scenario and return a RunResult (artifacts if cfg.out)."""
    model = _resolve_model(cfg.model)
    result = _SCENARIO_RUNNERS[cfg.scenario](cfg, model)
    if cfg.out:
        _write_artifacts(cfg, result)
    return result


def _run_steady(cfg, model):
    mesh = _resolve_mesh(cfg, "convergence:10")
    t0 = time.perf_counter()
    disc, X = steady_by_relaxation(model, mesh, cfg.pressure,
                                   newton=NewtonOptions(tol=cfg.newton_tol))
    cpu = time.perf_counter() - t0
    from .integrators import RunHistory
    hist = RunHistory()
    summary = {"scenario": cfg.scenario, "model": cfg.model,
               "cpu_time_s": cpu, "T_s_final": float(X[disc.S, 1]),
               "m_surf_final": float(X[disc.S, 0])}
    return RunResult(cfg, summary, hist, disc, X)


def _run_pressure_step(cfg, model):
    mesh = _resolve_mesh(cfg, "convergence:10")
    P0 = cfg.pressure_initial or 55e5
    sol = _resolve_steady(cfg, model, P0)
    t_end = cfg.t_end or 1e-4
    disc = Discretization(model, mesh, Forcing.constant(cfg.pressure))
    # relax the interpolated profile onto this mesh's discrete steady at
    # P0 before applying the step, so the transient is the step response
    # and not leftover interpolation error
    _, X0 = steady_by_relaxation(model, mesh, P0,
                                 X0=sol.to_state(disc),
                                 newton=NewtonOptions(tol=cfg.newton_tol))
    X_end, hist, cpu = _integrate(cfg, disc, X0, t_end)
    summary = _base_summary(cfg, hist, cpu)
    return RunResult(cfg, summary, hist, disc, X_end, sol)


def _run_pressure_oscillation(cfg, model):
    mesh = _resolve_mesh(cfg, "convergence:10")
    sol = _resolve_steady(cfg, model, cfg.pressure)
    period = 1.0 / cfg.frequency
    t_end = cfg.t_end or 8.0 * period
    forcing = Forcing.harmonic(cfg.pressure, cfg.amplitude, cfg.frequency)
    disc = Discretization(model, mesh, forcing)
    _, X0 = steady_by_relaxation(model, mesh, cfg.pressure,
                                 X0=sol.to_state(disc),
                                 newton=NewtonOptions(tol=cfg.newton_tol))
    if cfg.dt_max <= 0:
        cfg = replace(cfg, dt_max=period / 64.0)
    X_end, hist, cpu = _integrate(cfg, disc, X0, t_end)
    summary = _base_summary(cfg, hist, cpu)
    # project the last 4 periods onto the forcing harmonic
    from .analysis import _sin_cos_projection
    m_of_t = hist.surface_interpolant("m_surf")
    t_fit = np.linspace(t_end - 4.0 * period, t_end, 257)
    m_fit = m_of_t(t_fit)
    m_bar = float(np.mean(m_fit))
    M = _sin_cos_projection(t_fit, m_fit - m_bar, cfg.frequency)
    R = (M / m_bar) / cfg.amplitude
    summary.update(frequency_hz=cfg.frequency, response_re=R.real,
                   response_im=R.imag, response_gain=abs(R))
    return RunResult(cfg, summary, hist, disc, X_end, sol)


def _run_ignition(cfg, model):
    mesh = _resolve_mesh(cfg, "ignition")
    forcing = Forcing.constant_with_laser(cfg.pressure, cfg.laser_flux,
                                          beta_s=cfg.beta_s)
    disc = Discretization(model, mesh, forcing)
    X0 = disc.cold_state(Y_gas=model.burnt_mass_fractions())
    t_end = cfg.t_end or 0.5
    if cfg.dt_max <= 0:
        cfg = replace(cfg, dt_max=0.1)
    X_end, hist, cpu = _integrate(cfg, disc, X0, t_end)
    summary = _base_summary(cfg, hist, cpu)
    summary["t_ign"] = ignition_time(hist)
    return RunResult(cfg, summary, hist, disc, X_end)


def _run_limit_cycle(cfg, model):
    mesh = _resolve_mesh(cfg, "limit_cycle")
    sol = _resolve_steady(cfg, model, cfg.pressure)
    X0 = perturbed_steady_state(model, mesh, sol, cfg.pressure,
                                cfg.perturbation, cfg.newton_tol)
    disc = Discretization(model, mesh, Forcing.constant(cfg.pressure))
    t_end = cfg.t_end or 1.5
    X_end, hist, cpu = _integrate(cfg, disc, X0, t_end,
                                  raise_on_failure=False)
    summary = _base_summary(cfg, hist, cpu)
    t = hist.series("t")
    T_s = hist.series("T_s")
    try:
        _, _, amp, growth = envelope_and_growth(
            t[t <= 0.25], T_s[t <= 0.25], baseline=T_s[0])
        summary["growth_factor"] = growth
    except Exception as exc:
        summary["growth_factor"] = math.nan
        summary["growth_error"] = str(exc)
    win = (max(1.0, 0.66 * t[-1]), t[-1])
    try:
        peaks = spectral_peaks(t, T_s, window=win, n_peaks=3)
        summary["fundamental_hz"] = peaks[0][0]
        summary["fundamental_amplitude"] = peaks[0][1]
        for i, (f, a) in enumerate(peaks[1:], start=2):
            summary[f"peak{i}_hz"] = f
            summary[f"peak{i}_amplitude"] = a
    except Exception as exc:
        summary["spectrum_error"] = str(exc)
    return RunResult(cfg, summary, hist, disc, X_end, sol)


def _run_convergence_study(cfg, model):
    mesh = _resolve_mesh(cfg, "convergence:10")
    sol = _resolve_steady(cfg, model, cfg.pressure)
    t0 = time.perf_counter()
    disc, X = steady_by_relaxation(model, mesh, cfg.pressure,
                                   X0=sol.to_state(
                                       Discretization(model, mesh,
                                                      Forcing.constant(cfg.pressure))),
                                   newton=NewtonOptions(tol=cfg.newton_tol))
    cpu = time.perf_counter() - t0
    T_s = float(X[disc.S, 1])
    rel_err = abs(T_s - sol.T_s) / sol.T_s
    from .integrators import RunHistory
    summary = {"scenario": cfg.scenario, "model": cfg.model,
               "cpu_time_s": cpu, "n_cells": mesh.n_solid + mesh.n_gas,
               "T_s_final": T_s, "T_s_oracle": sol.T_s,
               "rel_err_Ts": rel_err}
    return RunResult(cfg, summary, RunHistory(), disc, X, sol)


_SCENARIO_RUNNERS = {
    "steady": _run_steady,
    "pressure_step": _run_pressure_step,
    "pressure_oscillation": _run_pressure_oscillation,
    "ignition": _run_ignition,
    "limit_cycle": _run_limit_cycle,
    "convergence_study": _run_convergence_study,
}


def _write_artifacts(cfg, result):
    os.makedirs(cfg.out, exist_ok=True)
    hist = result.history
    if hist is not None and hist.records:
        hist.to_csv(os.path.join(cfg.out, "steps.csv"))
        with open(os.path.join(cfg.out, "surface.csv"), "w") as f:
            f.write("t,T_s,m_surf,pressure\n")
            t = hist.series("t")
            Ts = hist.series("T_s")
            m = hist.series("m_surf")
            p = hist.series("pressure")
            for row in zip(t, Ts, m, p):
                f.write(",".join(repr(float(v)) for v in row) + "\n")
    if result.disc is not None and result.X_end is not None:
        t_end = hist.series("t")[-1] if hist is not None and hist.records \
            else 0.0
        result.disc.write_profile_csv(
            result.X_end, float(t_end),
            os.path.join(cfg.out, "profile_final.csv"))
    with open(os.path.join(cfg.out, "summary.txt"), "w") as f:
        for k, v in result.summary.items():
            f.write(f"{k} = {v}\n")


# ---------------------------------------------------------------------------
# campaigns

def _wp_entry(cfg):
    """One work-precision run, returning a small picklable summary."""
    res = run_scenario(cfg)
    out = dict(res.summary)
    h = res.history
    if h is not None and h.records:
        out["_t"] = h.series("t").tolist()
        out["_T_s"] = h.series("T_s").tolist()
    return out


def work_precision(configs, reference, jobs=1, error_key="t_ign"):
    """Run a config matrix plus a reference; tabulate error vs cost.

    The error is the relative difference of `error_key` against the
    reference run (t_ign for ignition studies; any scalar summary entry
    works).  Returns (rows, reference_summary); each row is a dict with
    method, knob, error, cpu_time, steps, jacobian_evals.
    """
    ref = _wp_entry(reference)
    if error_key not in ref or not np.isfinite(ref[error_key]):
        raise ConfigError(f"reference run lacks a finite {error_key!r}")
    if jobs > 1 and configs:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_wp_entry, configs))
    else:
        summaries = [_wp_entry(c) for c in configs]
    rows = []
    for cfg, s in zip(configs, summaries):
        val = s.get(error_key, math.nan)
        err = abs(val - ref[error_key]) / abs(ref[error_key])
        rows.append({
            "method": cfg.method, "mode": cfg.mode, "knob": s.get("knob"),
            "error": err, "value": val, "cpu_time": s.get("cpu_time_s"),
            "steps": s.get("n_accepted"),
            "jacobian_evals": s.get("jacobian_evals"),
            "failure": s.get("failure", ""),
        })
    return rows, ref


def work_precision_csv(rows, path_or_buf):
    buf = (path_or_buf if hasattr(path_or_buf, "write")
           else open(path_or_buf, "w"))
    try:
        buf.write("method,mode,knob,error,value,cpu_time,steps,"
                  "jacobian_evals,failure\n")
        for r in rows:
            buf.write(",".join(str(r[k]) for k in
                               ("method", "mode", "knob", "error", "value",
                                "cpu_time", "steps", "jacobian_evals",
                                "failure")) + "\n")
    finally:
        if buf is not path_or_buf:
            buf.close()


def cfl_report(hist):
    """Per-step CFL diagnostics: (t, dt, cfl, dt_at_cfl_1).

    The CFL number recorded on each accepted step is dt·max(|u|/dx) over
    the gas cells; dt_at_cfl_1 = dt/cfl is the step a CFL=1 limitation
    would have imposed.  Diagnostics only — never used to limit dt.
    """
    t = hist.series("t")
    dt = hist.series("dt")
    cfl = hist.series("cfl")
    with np.errstate(divide="ignore", invalid="ignore"):
        dt1 = np.where(cfl > 0, dt / cfl, np.inf)
    return np.column_stack([t, dt, cfl, dt1])
