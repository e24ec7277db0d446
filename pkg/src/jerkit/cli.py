"""Command-line entry point.

Three subcommands wire the modules into reproducible batch workflows:

* ``design-check``  validate every device in a scenario config
* ``simulate``      write synthetic power-sweep traces plus ground truth
* ``analyze``       run the full extraction chain on a sweep directory

Every run writes a ``run_manifest.json`` next to its outputs.  Exit
codes: 0 success, 2 config error, 3 data error, 4 fit non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .exceptions import ConfigError, DataError, FitConvergenceError, JerkitError
from .io import (
    GROUND_TRUTH_NAME,
    load_config,
    watt_to_dbm,
    write_csv_rows,
    write_json,
    write_manifest,
    write_trace_csv,
)
from .modes import design_check
from .pipeline import analyze_directory
from .synth import build_scenario, default_config, generate_sweep, scenario_ground_truth

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_FIT = 4


def _diag(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _write_run_manifest(out_dir: Path, command: str, args) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "run_manifest.json", {
        "command": command,
        "config": getattr(args, "config", None),
        "in_dir": getattr(args, "in_dir", None),
        "out_dir": str(out_dir),
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    })


def _scenario_config(args) -> dict:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = dict(cfg)
        cfg["seed"] = args.seed
    return cfg


def cmd_design_check(args) -> int:
    cfg = _scenario_config(args)
    scenario = build_scenario(cfg, enforce_design_rule=False)
    all_pass = True
    rows = []
    for dev in scenario.devices:
        report = design_check(dev.circuit)
        all_pass &= report.passed
        rows.append({
            "device_id": dev.device_id,
            "inductance_ratio": report.inductance_ratio,
            "voltage_drop_ratio": report.voltage_drop_ratio,
            "passed": report.passed,
        })
    print(json.dumps({"devices": rows, "all_passed": all_pass}, indent=2))
    return 0 if all_pass else 1


def cmd_simulate(args) -> int:
    cfg = _scenario_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = build_scenario(cfg, jobs=args.jobs)

    entries = []
    for device, harmonic, ip, trace, truth in generate_sweep(scenario):
        name = f"{device.device_id}_h{harmonic}_p{ip:02d}.csv"
        write_trace_csv(out_dir / name, trace.freqs, trace.s21)
        entries.append({
            "file": name,
            "device_id": device.device_id,
            "sample_id": device.sample_id,
            "kind": device.kind,
            "jj_count": device.circuit.junction.count,
            "a_tj_um2": device.circuit.junction.a_total or None,
            "harmonic": harmonic,
            "applied_power_dbm": watt_to_dbm(trace.applied_power),
        })
    meta = {
        "temperature_k": scenario.temperature,
        "line_z0_ohm": scenario.line_z0,
        "feed_z0_ohm": scenario.feed_z0,
        "v_ph_m_per_s": float(cfg["v_ph_m_per_s"]),
        "seed": scenario.seed,
        "tool_version": __version__,
    }
    write_manifest(out_dir, meta, entries)
    write_json(out_dir / GROUND_TRUTH_NAME, scenario_ground_truth(scenario))
    _write_run_manifest(out_dir, "simulate", args)
    _diag({"status": "ok", "traces": len(entries), "out_dir": str(out_dir)})
    return 0


def _uncertain_json(u):
    return {"value": u.value, "sigma": u.sigma}


def cmd_analyze(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = analyze_directory(in_dir, jobs=args.jobs, bootstrap=args.bootstrap)
    report = result.report

    write_csv_rows(
        out_dir / "delta_table.csv",
        ["device_id", "sample_id", "kind", "a_tj_um2", "f_1h_hz", "f_2h_hz",
         "delta_hz", "l_tj_h", "coupling_limited"],
        [
            (a.device_id, a.sample_id, a.kind,
             float(a.a_tj) if a.a_tj is not None else 0.0,
             a.harmonic_1.f_r, a.harmonic_2.f_r, a.delta, a.l_tj,
             int(a.l_tj_coupling_limited))
            for a in result.devices
        ],
    )
    write_csv_rows(
        out_dir / "gamma_lp.csv",
        ["device_id", "sample_id", "kind", "harmonic", "a_tj_um2",
         "gamma_lp", "sigma", "ext_pinned"],
        [
            (a.device_id, a.sample_id, a.kind, harmonic,
             float(a.a_tj) if a.a_tj is not None else 0.0,
             h.gamma_lp.value, h.gamma_lp.sigma, int(h.ext_pinned))
            for a in result.devices
            for harmonic, h in ((1, a.harmonic_1), (2, a.harmonic_2))
        ],
    )
    write_csv_rows(
        out_dir / "gamma_tj.csv",
        ["device_id", "harmonic", "a_tj", "gamma_tj", "sigma"],
        [tuple(p) for p in report.gamma_tj_points],
    )
    write_json(out_dir / "extraction_report.json", {
        "baseline_1h": {k: _uncertain_json(v) for k, v in report.baseline_1h.items()},
        "baseline_2h": {k: _uncertain_json(v) for k, v in report.baseline_2h.items()},
        "slope_1h": dataclasses.asdict(report.slope_1h),
        "mean_2h": dataclasses.asdict(report.mean_2h),
        "gamma_tj_points": [p._asdict() for p in report.gamma_tj_points],
        "diagnostics": list(report.diagnostics),
    })
    _write_run_manifest(out_dir, "analyze", args)
    _diag({
        "status": "ok",
        "slope_1h_per_um2": report.slope_1h.slope,
        "mean_2h": report.mean_2h.mean,
        "out_dir": str(out_dir),
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jerkit",
        description="Simulation and loss extraction for junction-embedded resonators",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-check", help="validate devices against the design rule")
    p.add_argument("--config", help="scenario config JSON (default: built-in scenario)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_design_check)

    p = sub.add_parser("simulate", help="generate synthetic power sweeps")
    p.add_argument("--config", help="scenario config JSON (default: built-in scenario)")
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="run the extraction chain on a sweep directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--bootstrap", action="store_true",
                   help="bootstrap the saturation-level uncertainties")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _diag({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_CONFIG
    except FitConvergenceError as exc:
        _diag({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_FIT
    except DataError as exc:
        _diag({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_DATA
    except JerkitError as exc:
        _diag({"error": type(exc).__name__, "message": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
