"""Command-line entry point: ``thermoshell {simulate,calibrate,capsense,compare}``.

Exit codes: 0 success, 2 configuration error, 3 invariant violation,
4 numerical failure, 1 anything else. Failures also print a one-line JSON
error record on stderr and, when the output directory exists, ``error.json``.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import calibration as cal
from . import runner
from .config import ScenarioConfig, parse_configs, serialize
from .errors import ConfigError, InvariantViolation, ThermoShellError
from .scenario import assert_no_violations

OUT_ENV = "THERMOSHELL_OUT"
DIAG_COLUMNS = ("tick_index", "iterations", "objective", "pg_norm", "converged", "clamped", "fallback")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out, command, configs, started):
    # wall-clock and host data live here, never in telemetry or summaries
    from . import __version__
    _write_json(os.path.join(out, "manifest.json"), {
        "command": command, "configs": [os.path.abspath(c) for c in configs], "version": __version__,
        "started_unix": started, "elapsed_s": round(time.time() - started, 3),
        "python": platform.python_version(), "numpy": np.__version__})


def _write_diagnostics(path, diags):
    with open(path, "w") as fh:
        fh.write(",".join(DIAG_COLUMNS) + "\n")
        for d in diags:
            fh.write(f"{d.tick_index},{d.iterations},{d.objective:.6g},{d.pg_norm:.3g},{int(d.converged)},"
                     f"{int(d.clamped)},{int(d.fallback)}\n")


def _out_dir(args, cfg):
    root = args.out or os.environ.get(OUT_ENV) or "thermoshell_out"
    path = os.path.join(root, cfg["output.name"])
    os.makedirs(path, exist_ok=True)
    return path


def _load(paths):
    return parse_configs(paths) if paths else ScenarioConfig()


def _simulate_one(paths, out_root):
    cfg = _load(paths)
    root = out_root
    out = os.path.join(root, cfg["output.name"])
    os.makedirs(out, exist_ok=True)
    started = time.time()
    run = runner.run_scenario(cfg)
    run.result.telemetry.to_csv(os.path.join(out, "telemetry.csv"))
    if cfg["output.diagnostics"] and run.result.diagnostics:
        _write_diagnostics(os.path.join(out, "mpc_diagnostics.csv"), run.result.diagnostics)
    summary = run.summary.to_dict()
    summary["bounds"] = list(run.result.bounds)
    _write_json(os.path.join(out, "summary.json"), summary)
    with open(os.path.join(out, "config.ini"), "w") as fh:
        fh.write(serialize(cfg))
    _write_manifest(out, "simulate", paths, started)
    assert_no_violations(run.result.telemetry, run.result.bounds)
    return out, summary


def cmd_simulate(args):
    root = args.out or os.environ.get(OUT_ENV) or "thermoshell_out"
    groups = [[c] for c in args.config] if args.jobs > 1 and len(args.config) > 1 else [args.config]
    if args.jobs > 1 and len(groups) > 1:
        # independent scenarios, one output directory each; results reported in input order
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_one, groups, [root] * len(groups)))
    else:
        results = [_simulate_one(g, root) for g in groups]
    for out, summary in results:
        print(f"{out}: rms {summary['rms_error_C']:.3f} C, surface {summary['surface_min_C']:.2f}.."
              f"{summary['surface_max_C']:.2f} C, violations {summary['violations']}")
    return 0


def cmd_calibrate(args):
    cfg = _load(args.config)
    out = _out_dir(args, cfg)
    started = time.time()
    base = runner.plant_config(cfg)
    initial = cal.FreeParameters() if args.from_prior else cal.FreeParameters.from_config(base)
    params, report = cal.calibrate(initial=initial, base=base)
    cal.write_parameters(os.path.join(out, "calibrated.params"), params, report)
    with open(os.path.join(out, "calibration_report.txt"), "w") as fh:
        fh.write("\n".join(report.summary_lines()) + "\n")
    with open(os.path.join(out, "calibration_history.csv"), "w") as fh:
        names = list(params.values())
        fh.write(",".join(names + ["objective"]) + "\n")
        for values, obj in report.history:
            fh.write(",".join(f"{values[n]:.9g}" for n in names) + f",{obj:.9g}\n")
    if args.traces:
        calibrated = params.apply(base)
        _, water = cal.measure_water_tau(calibrated, method="exact", return_series=True)
        _, cover = cal.measure_cover_tau(calibrated, method="exact", return_series=True)
        water.to_csv(os.path.join(out, "trace_water_step.csv"))
        cover.to_csv(os.path.join(out, "trace_cover_step.csv"))
    _write_manifest(out, "calibrate", args.config, started)
    print("\n".join(report.summary_lines()))
    return 0


def cmd_capsense(args):
    from .capsense import write_normalized_csv

    cfg = _load(args.config)
    out = _out_dir(args, cfg)
    started = time.time()
    times, raw, _, norm, flags, stats = runner.run_capsense(cfg)
    with open(os.path.join(out, "capsense_raw.csv"), "w") as fh:
        fh.write("t_s,raw\n" + "".join(f"{t:.6g},{x:.6g}\n" for t, x in zip(times, raw)))
    write_normalized_csv(os.path.join(out, "capsense.csv"), times, norm, flags)
    _write_json(os.path.join(out, "summary.json"), stats)
    _write_manifest(out, "capsense", args.config, started)
    print(f"{out}: gain {stats['gain']:.4f}, contact samples {stats['contact_samples']}/{stats['samples']}")
    return 0


def cmd_compare(args):
    cfg = _load(args.config)
    out = _out_dir(args, cfg)
    started = time.time()
    runs = {kind: runner.run_scenario(cfg, kind) for kind in ("mpc", "pi")}
    t = runs["mpc"].result.telemetry["t_s"]
    err = {k: r.result.telemetry["T_surface_C"] - r.result.telemetry["setpoint_C"] for k, r in runs.items()}
    with open(os.path.join(out, "comparison.csv"), "w") as fh:
        fh.write("t_s,error_mpc_C,error_pi_C\n")
        for row in zip(t, err["mpc"], err["pi"]):
            fh.write(",".join(f"{v:.6g}" for v in row) + "\n")
    summary = {k: r.summary.to_dict() for k, r in runs.items()}
    summary["mpc_better_rms"] = summary["mpc"]["rms_error_C"] < summary["pi"]["rms_error_C"]
    summary["mpc_better_iae"] = summary["mpc"]["iae_C_s"] < summary["pi"]["iae_C_s"]
    _write_json(os.path.join(out, "summary.json"), summary)
    for k, r in runs.items():
        r.result.telemetry.to_csv(os.path.join(out, f"telemetry_{k}.csv"))
    _write_manifest(out, "compare", args.config, started)
    for k, r in runs.items():
        assert_no_violations(r.result.telemetry, r.result.bounds)
    print(f"{out}: rms mpc {summary['mpc']['rms_error_C']:.3f} C, pi {summary['pi']['rms_error_C']:.3f} C")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="thermoshell", description="Soft thermal cover digital twin.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", action="append", default=[], metavar="PATH",
                        help="scenario file; repeat to layer files (later wins)")
        sp.add_argument("--out", default=None, help=f"output root (default ${OUT_ENV} or ./thermoshell_out)")

    s = sub.add_parser("simulate", help="run a scenario, write telemetry and a summary")
    common(s)
    s.add_argument("--jobs", type=int, default=1, help="run several --config scenarios in parallel")
    s.set_defaults(func=cmd_simulate)
    c = sub.add_parser("calibrate", help="fit the free plant parameters to the target time constants and range")
    common(c)
    c.add_argument("--from-prior", action="store_true", help="start from the uncalibrated prior")
    c.add_argument("--traces", action="store_true", help="also write the step-response traces")
    c.set_defaults(func=cmd_calibrate)
    k = sub.add_parser("capsense", help="normalize a capacitive stream and flag contact")
    common(k)
    k.set_defaults(func=cmd_capsense)
    m = sub.add_parser("compare", help="run MPC and PI on the same profile")
    common(m)
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        args.jobs = 1
    try:
        return args.func(args)
    except ThermoShellError as exc:
        return _fail(exc, exc.exit_code)
    except Exception as exc:  # anything unexpected still gets a record and exit 1
        return _fail(exc, 1)


def _fail(exc, code):
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("key", "line", "node"):
        if getattr(exc, attr, None) is not None:
            record[attr] = getattr(exc, attr)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
