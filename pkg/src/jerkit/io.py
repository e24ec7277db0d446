"""File formats shared across the toolkit.

Traces travel as CSV with header ``freq_hz,re_s21,im_s21``; a sweep
manifest (JSON) ties trace files to devices, harmonics, and applied
powers in dBm.  Floats are written with repr precision so identical
inputs reproduce byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataError
from .extraction import DeviceRecord, Uncertain

TRACE_HEADER = ["freq_hz", "re_s21", "im_s21"]
MANIFEST_NAME = "sweep_manifest.json"
GROUND_TRUTH_NAME = "ground_truth.json"


def dbm_to_watt(dbm: float) -> float:
    """P[W] = 10^((dBm - 30) / 10)."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    if watt <= 0:
        raise DataError("power must be > 0 to express in dBm")
    return 10.0 * np.log10(watt) + 30.0


def write_trace_csv(path, freqs, s21) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for f, z in zip(freqs, s21):
            w.writerow([repr(float(f)), repr(float(z.real)), repr(float(z.imag))])


def read_trace_csv(path):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRACE_HEADER:
            raise DataError(f"{path}: expected header {','.join(TRACE_HEADER)}")
        rows = [(float(a), float(b), float(c)) for a, b, c in reader]
    if not rows:
        raise DataError(f"{path}: empty trace")
    arr = np.asarray(rows)
    return arr[:, 0], arr[:, 1] + 1j * arr[:, 2]


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing config file: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return cfg


# ---------------------------------------------------------------------------
# sweep manifest


def write_manifest(out_dir, meta: dict, entries: list) -> None:
    write_json(Path(out_dir) / MANIFEST_NAME,
               {"meta": meta, "traces": entries})


def read_manifest(in_dir):
    payload = read_json(Path(in_dir) / MANIFEST_NAME)
    for key in ("meta", "traces"):
        if key not in payload:
            raise DataError(f"sweep manifest lacks '{key}'")
    meta = payload["meta"]
    for key in ("temperature_k", "line_z0_ohm"):
        if key not in meta:
            raise DataError(f"sweep manifest meta lacks '{key}'")
    return meta, payload["traces"]


# ---------------------------------------------------------------------------
# device records


def record_to_json(record: DeviceRecord) -> dict:
    def pack(u):
        return None if u is None else [u.value, u.sigma]

    return {
        "device_id": record.device_id,
        "sample_id": record.sample_id,
        "kind": record.kind,
        "jj_count": record.jj_count,
        "a_tj_um2": record.a_tj,
        "gamma_lp_1h": pack(record.gamma_lp_1h),
        "gamma_lp_2h": pack(record.gamma_lp_2h),
        "l_tj_h": record.l_tj,
    }


def record_from_json(obj: dict) -> DeviceRecord:
    def unpack(v):
        return None if v is None else Uncertain(float(v[0]), float(v[1]))

    try:
        return DeviceRecord(
            device_id=obj["device_id"],
            sample_id=obj["sample_id"],
            kind=obj["kind"],
            jj_count=int(obj.get("jj_count", 0)),
            a_tj=obj.get("a_tj_um2"),
            gamma_lp_1h=unpack(obj.get("gamma_lp_1h")),
            gamma_lp_2h=unpack(obj.get("gamma_lp_2h")),
            l_tj=obj.get("l_tj_h"),
        )
    except KeyError as exc:
        raise DataError(f"device record lacks field {exc}") from exc


def write_csv_rows(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------------------
# single-device circuit documents


def circuit_from_config(doc: dict):
    """Build a JerCircuit from one device document.

    Keys carry explicit unit suffixes, for example::

        {"feed_z0_ohm": 50, "c_couple_ff": 2, "l_couple_nh": 2,
         "line": {"z0_ohm": 80, "v_ph_m_per_s": 1.2e8,
                  "length_um": 10300, "alpha_np_per_m": 3e-5},
         "junction": {"count": 2, "area_um2": 10, "l_tj_nh": 0.066,
                      "r_series_ohm": 0, "g_shunt_us": 0, "c_shunt_ff": 0.2},
         "temperature_mk": 15}
    """
    from .circuit import JerCircuit, JunctionArray, LineSpec

    try:
        line = doc["line"]
        half = LineSpec(
            z0=float(line["z0_ohm"]),
            v_ph=float(line["v_ph_m_per_s"]),
            length=0.5 * float(line["length_um"]) * 1e-6,
            alpha=float(line.get("alpha_np_per_m", 0.0)),
        )
        jdoc = doc.get("junction", {})
        junction = JunctionArray(
            count=int(jdoc.get("count", 0)),
            area_each=float(jdoc.get("area_um2", 0.0)),
            l_total=float(jdoc.get("l_tj_nh", 0.0)) * 1e-9,
            r_series=float(jdoc.get("r_series_ohm", 0.0)),
            g_shunt=float(jdoc.get("g_shunt_us", 0.0)) * 1e-6,
            c_shunt=float(jdoc.get("c_shunt_ff", 0.0)) * 1e-15,
        )
        return JerCircuit(
            feed_z0=float(doc["feed_z0_ohm"]),
            c_couple=float(doc.get("c_couple_ff", 0.0)) * 1e-15,
            l_couple=float(doc.get("l_couple_nh", 0.0)) * 1e-9,
            left=half, right=half, junction=junction,
            temperature=float(doc.get("temperature_mk", 15.0)) * 1e-3,
        )
    except KeyError as exc:
        raise ConfigError(f"device document lacks key {exc}") from exc


# ---------------------------------------------------------------------------
# power-dependence data and fit records

POWER_DEP_HEADER = ["n_p", "gamma", "sigma_gamma"]


def read_power_dependence_csv(path, f, temperature, device_id="", harmonic=1):
    """Read a per-device ``n_p,gamma,sigma_gamma`` table."""
    from .tlsfit import PowerDependence

    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != POWER_DEP_HEADER:
            raise DataError(
                f"{path}: expected header {','.join(POWER_DEP_HEADER)}")
        rows = [(float(a), float(b), float(c)) for a, b, c in reader]
    if not rows:
        raise DataError(f"{path}: empty power-dependence table")
    arr = np.asarray(rows)
    return PowerDependence(n_p=arr[:, 0], gamma=arr[:, 1],
                           sigma_gamma=arr[:, 2], f=f,
                           temperature=temperature, device_id=device_id,
                           harmonic=harmonic)


def write_power_dependence_csv(path, data) -> None:
    write_csv_rows(path, POWER_DEP_HEADER,
                   zip(map(float, data.n_p), map(float, data.gamma),
                       map(float, data.sigma_gamma)))


def tls_result_to_json(result) -> dict:
    """Serialize a saturation-fit record with every fitted field."""
    return {
        "gamma0": result.gamma0,
        "n_c": result.n_c,
        "alpha_exp": result.alpha_exp,
        "gamma_ext": result.gamma_ext,
        "gamma_lp": result.gamma_lp,
        "ext_pinned": result.ext_pinned,
        "covariance": [[float(v) for v in row] for row in result.covariance],
        "residual_chi2": result.residual_chi2,
        "f_hz": result.f,
        "temperature_k": result.temperature,
        "flags": list(result.flags),
    }
