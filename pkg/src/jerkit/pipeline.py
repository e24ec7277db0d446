"""Batch analysis: trace files in, extraction report out.

Runs the full measurement-side chain on a directory written by the
simulator (or by any instrument producing the same formats): notch fits
per trace, photon-number conversion, power-dependence fits per device
and harmonic, harmonic-offset and inductance tables, and the
cross-device extraction.  Ground-truth files are never read here.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import LineSpec
from .exceptions import DataError, FitError
from .extraction import DeviceRecord, ExtractionReport, Uncertain, extract_report
from .io import dbm_to_watt, read_manifest, read_trace_csv
from .modes import HarmonicPair, invert_l_tj
from .notchfit import PowerSweepTrace, fit_notch
from .tlsfit import (
    assemble_power_dependence,
    bootstrap_gamma_lp,
    fit_power_dependence,
    gamma_lp,
)

__all__ = ["DeviceAnalysis", "AnalysisResult", "analyze_directory",
           "analyze_scenario"]


@dataclass(frozen=True)
class HarmonicAnalysis:
    f_r: float
    gamma_lp: Uncertain
    ext_pinned: bool
    chi2_dof: float
    n_traces: int


@dataclass(frozen=True)
class DeviceAnalysis:
    device_id: str
    sample_id: str
    kind: str
    jj_count: int
    a_tj: float | None
    harmonic_1: HarmonicAnalysis
    harmonic_2: HarmonicAnalysis
    delta: float
    l_tj: float
    l_tj_coupling_limited: bool


@dataclass(frozen=True)
class AnalysisResult:
    devices: tuple
    report: ExtractionReport


def _fit_trace(trace: PowerSweepTrace):
    try:
        fit = fit_notch(trace)
    except FitError as exc:
        # a single unusable trace (for instance an internal loss fitted
        # below zero at full saturation) is dropped, not fatal
        return None, trace.applied_power, (
            f"{trace.device_id} h{trace.harmonic} @ "
            f"{trace.applied_power:.3e} W: {exc}"
        )
    return fit, trace.applied_power, None


def _fit_one_file(args):
    path, power_w, device_id, harmonic = args
    freqs, z = read_trace_csv(path)
    return _fit_trace(PowerSweepTrace(freqs=freqs, s21=z, applied_power=power_w,
                                      device_id=device_id, harmonic=harmonic))


def _group_entries(entries, in_dir):
    groups = defaultdict(list)
    meta_by_device = {}
    for e in entries:
        for key in ("file", "device_id", "harmonic", "applied_power_dbm",
                    "sample_id", "kind"):
            if key not in e:
                raise DataError(f"manifest entry lacks '{key}'")
        path = Path(in_dir) / e["file"]
        if not path.exists():
            raise DataError(f"trace file listed in manifest is missing: {path}")
        groups[(e["device_id"], int(e["harmonic"]))].append(
            (path, dbm_to_watt(float(e["applied_power_dbm"])),
             e["device_id"], int(e["harmonic"]))
        )
        meta_by_device[e["device_id"]] = {
            "sample_id": e["sample_id"],
            "kind": e["kind"],
            "jj_count": int(e.get("jj_count", 0)),
            "a_tj_um2": e.get("a_tj_um2"),
        }
    return groups, meta_by_device


def _analyze_harmonic(fit_power_pairs, temperature, device_id, harmonic,
                      bootstrap):
    fits = [fp[0] for fp in fit_power_pairs]
    powers = [fp[1] for fp in fit_power_pairs]
    f_r = float(np.median([ft.f_r for ft in fits]))
    data = assemble_power_dependence(fits, powers, f_r, temperature,
                                     device_id=device_id, harmonic=harmonic)
    result = fit_power_dependence(data)
    value, sigma = gamma_lp(result)
    if bootstrap:
        sigma = bootstrap_gamma_lp(data)
    return HarmonicAnalysis(f_r=f_r, gamma_lp=Uncertain(value, sigma),
                            ext_pinned=result.ext_pinned,
                            chi2_dof=result.residual_chi2,
                            n_traces=len(fits))


def _finish_analysis(fit_results, meta_by_device, temperature, line,
                     bootstrap) -> AnalysisResult:
    analyses = []
    for device_id in sorted({k[0] for k in fit_results}):
        dmeta = meta_by_device[device_id]
        per_h = {}
        for harmonic in (1, 2):
            outcomes = fit_results.get((device_id, harmonic))
            if not outcomes:
                raise DataError(
                    f"{device_id}: no traces for harmonic {harmonic}"
                )
            pairs = [(ft, p) for ft, p, err in outcomes if ft is not None]
            for _, _, err in outcomes:
                if err is not None:
                    warnings.warn(f"dropped trace: {err}", stacklevel=2)
            if len(pairs) < max(6, len(outcomes) // 2):
                raise DataError(
                    f"{device_id} h{harmonic}: too few usable traces "
                    f"({len(pairs)} of {len(outcomes)})"
                )
            per_h[harmonic] = _analyze_harmonic(
                pairs, temperature, device_id, harmonic, bootstrap)

        pair = HarmonicPair(f_1h=per_h[1].f_r, f_2h=per_h[2].f_r)
        estimate = invert_l_tj(pair.f_1h, pair.f_2h, line)
        analyses.append(DeviceAnalysis(
            device_id=device_id,
            sample_id=dmeta["sample_id"],
            kind=dmeta["kind"],
            jj_count=dmeta["jj_count"],
            a_tj=dmeta["a_tj_um2"],
            harmonic_1=per_h[1],
            harmonic_2=per_h[2],
            delta=pair.delta,
            l_tj=estimate.l_tj,
            l_tj_coupling_limited=estimate.coupling_limited,
        ))

    records = [
        DeviceRecord(
            device_id=a.device_id, sample_id=a.sample_id, kind=a.kind,
            jj_count=a.jj_count, a_tj=a.a_tj,
            gamma_lp_1h=a.harmonic_1.gamma_lp,
            gamma_lp_2h=a.harmonic_2.gamma_lp,
            l_tj=a.l_tj,
        )
        for a in analyses
    ]
    report = extract_report(records)
    return AnalysisResult(devices=tuple(analyses), report=report)


def analyze_directory(in_dir, jobs: int = 1,
                      bootstrap: bool = False) -> AnalysisResult:
    """Full analysis of a sweep directory; deterministic for fixed input."""
    meta, entries = read_manifest(in_dir)
    if not entries:
        raise DataError("sweep manifest lists no traces")
    temperature = float(meta["temperature_k"])
    line = LineSpec(z0=float(meta["line_z0_ohm"]),
                    v_ph=float(meta.get("v_ph_m_per_s", 1.2e8)),
                    length=1e-2)

    groups, meta_by_device = _group_entries(entries, in_dir)

    fit_results = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key in sorted(groups):
                fit_results[key] = list(pool.map(_fit_one_file, groups[key],
                                                 chunksize=4))
    else:
        for key in sorted(groups):
            fit_results[key] = [_fit_one_file(a) for a in groups[key]]

    return _finish_analysis(fit_results, meta_by_device, temperature, line,
                            bootstrap)


def analyze_scenario(scenario, bootstrap: bool = False) -> AnalysisResult:
    """Generate and analyze a scenario in memory (no file round trip).

    Same chain as analyze_directory on a simulate output; ground truth
    is never consulted.
    """
    from .synth import generate_sweep

    fit_results = defaultdict(list)
    meta_by_device = {}
    for device, harmonic, _, trace, _ in generate_sweep(scenario):
        fit_results[(device.device_id, harmonic)].append(_fit_trace(trace))
        meta_by_device[device.device_id] = {
            "sample_id": device.sample_id,
            "kind": device.kind,
            "jj_count": device.circuit.junction.count,
            "a_tj_um2": device.circuit.junction.a_total or None,
        }
    line = LineSpec(z0=scenario.line_z0,
                    v_ph=scenario.devices[0].circuit.left.v_ph, length=1e-2)
    return _finish_analysis(fit_results, meta_by_device, scenario.temperature,
                            line, bootstrap)
