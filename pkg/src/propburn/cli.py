"""Command-line interface.

Subcommands:
  run                one scenario (config file and/or flags)
  sweep              work-precision matrix over methods and knobs
  analyze            post-process a run directory (spectrum, envelope, CFL)
  validate-tableaux  structural and order checks of all tableaux

Exit codes: 0 success, 2 configuration error, 3 Newton failure,
4 time-step underflow, 1 other runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_NEWTON = 3
EXIT_DT_UNDERFLOW = 4


def _add_common(p):
    p.add_argument("--config", help="scenario INI file")
    p.add_argument("--scenario", help="scenario name")
    p.add_argument("--model", help="model preset name or INI path")
    p.add_argument("--mesh", help="mesh preset name or CSV path")
    p.add_argument("--method", help="integration method")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--dt", type=float, help="fixed time step (fixed_dt mode)")
    p.add_argument("--tmax", type=float, help="final physical time")
    p.add_argument("--out", help="output directory")


def _build_config(args):
    from .harness import ScenarioConfig
    if args.config:
        cfg = ScenarioConfig.from_file(args.config)
    else:
        if not args.scenario:
            from .harness import ConfigError
            raise ConfigError("either --config or --scenario is required")
        cfg = ScenarioConfig(scenario=args.scenario)
    updates = {}
    for flag, field in (("scenario", "scenario"), ("model", "model"),
                        ("mesh", "mesh"), ("method", "method"),
                        ("rtol", "rtol"), ("atol", "atol"),
                        ("tmax", "t_end"), ("out", "out")):
        v = getattr(args, flag, None)
        if v is not None:
            updates[field] = v
    if args.dt is not None:
        updates["dt"] = args.dt
        updates["mode"] = "fixed_dt"
    return dataclasses.replace(cfg, **updates)


def _cmd_run(args):
    from .harness import run_scenario
    cfg = _build_config(args)
    result = run_scenario(cfg)
    for k, v in result.summary.items():
        print(f"{k} = {v}")
    if result.summary.get("failure"):
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_sweep(args):
    from .harness import ScenarioConfig, work_precision, work_precision_csv
    cfg = _build_config(args)
    knobs = [float(v) for v in args.knobs.split(",")]
    methods = args.methods.split(",")
    configs = []
    for method in methods:
        for knob in knobs:
            if args.sweep_mode == "fixed_dt":
                c = dataclasses.replace(cfg, method=method, mode="fixed_dt",
                                        dt=knob)
            elif method in ("ie", "ckn"):
                c = dataclasses.replace(cfg, method=method, mode="adaptive",
                                        variation_bound=knob)
            else:
                c = dataclasses.replace(cfg, method=method, mode="adaptive",
                                        rtol=knob, atol=knob / 10.0)
            configs.append(dataclasses.replace(c, out=""))
    reference = dataclasses.replace(cfg, method=args.ref_method,
                                    mode="adaptive", rtol=args.ref_rtol,
                                    atol=args.ref_rtol / 10.0, out="")
    rows, ref = work_precision(configs, reference, jobs=args.jobs,
                               error_key=args.error_key)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "work_precision.csv")
    work_precision_csv(rows, path)
    print(f"reference {args.error_key} = {ref[args.error_key]}")
    for r in rows:
        print(f"{r['method']:>10} knob={r['knob']:<10g} "
              f"error={r['error']:.3e} cpu={r['cpu_time']:.2f}s "
              f"steps={r['steps']}{' FAILED' if r['failure'] else ''}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_analyze(args):
    from .analysis import envelope_and_growth, spectral_peaks
    data = np.genfromtxt(os.path.join(args.rundir, "surface.csv"),
                         delimiter=",", names=True)
    t, T_s = data["t"], data["T_s"]
    out_lines = []
    try:
        _, _, A, b = envelope_and_growth(t, T_s)
        out_lines.append(f"growth_factor = {b}")
        out_lines.append(f"growth_amplitude = {A}")
    except Exception as exc:
        out_lines.append(f"growth_error = {exc}")
    try:
        lo = args.window_start if args.window_start is not None else \
            t[0] + 0.66 * (t[-1] - t[0])
        peaks = spectral_peaks(t, T_s, window=(lo, t[-1]), n_peaks=5)
        for i, (f, a) in enumerate(peaks, 1):
            out_lines.append(f"peak{i}_hz = {f}")
            out_lines.append(f"peak{i}_amplitude = {a}")
    except Exception as exc:
        out_lines.append(f"spectrum_error = {exc}")
    text = "\n".join(out_lines)
    print(text)
    with open(os.path.join(args.rundir, "analysis.txt"), "w") as f:
        f.write(text + "\n")
    return EXIT_OK


def _cmd_validate_tableaux(args):
    from .tableaux import METHODS, TableauError, validate_tableau
    failures = 0
    for name, tab in sorted(METHODS.items()):
        try:
            validate_tableau(tab)
            print(f"{name:>10}: ok (order {tab.order}, "
                  f"{tab.n_stages} stages, "
                  f"{'stiffly accurate' if tab.stiffly_accurate else 'reflected constraints'})")
        except TableauError as exc:
            failures += 1
            print(f"{name:>10}: FAILED - {exc}")
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="propburn",
        description="One-dimensional solid-propellant combustion solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="work-precision sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--methods", default="ie,ckn,esdirk32a,esdirk43b,esdirk54a")
    p_sweep.add_argument("--knobs", default="1e-1,1e-2,1e-3,1e-4",
                         help="comma-separated rtol/variation-bound/dt values")
    p_sweep.add_argument("--sweep-mode", default="adaptive",
                         choices=["adaptive", "fixed_dt"])
    p_sweep.add_argument("--ref-method", default="esdirk54a")
    p_sweep.add_argument("--ref-rtol", type=float, default=1e-6)
    p_sweep.add_argument("--error-key", default="t_ign")
    p_sweep.add_argument("--jobs", type=int, default=1)

    p_an = sub.add_parser("analyze", help="post-process a run directory")
    p_an.add_argument("rundir")
    p_an.add_argument("--window-start", type=float,
                      help="start of the spectral window (default: last third)")

    sub.add_parser("validate-tableaux", help="check all Butcher tableaux")

    args = parser.parse_args(argv)
    from .harness import ConfigError
    from .integrators import IntegrationError
    from .newton import NewtonError
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "validate-tableaux":
            return _cmd_validate_tableaux(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        if getattr(exc, "kind", "") == "dt_underflow":
            return EXIT_DT_UNDERFLOW
        return EXIT_NEWTON
    except NewtonError as exc:
        print(f"Newton failure: {exc}", file=sys.stderr)
        return EXIT_NEWTON
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
