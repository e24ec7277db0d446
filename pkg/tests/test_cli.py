import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from jerkit.cli import main
from jerkit.io import (
    dbm_to_watt,
    read_manifest,
    read_trace_csv,
    watt_to_dbm,
    write_trace_csv,
)
from jerkit.synth import default_config


def test_dbm_conversion_round_trip():
    assert dbm_to_watt(-30.0) == pytest.approx(1e-6)
    assert dbm_to_watt(0.0) == pytest.approx(1e-3)
    assert watt_to_dbm(dbm_to_watt(-123.4)) == pytest.approx(-123.4)


def test_trace_csv_round_trip(tmp_path):
    f = np.linspace(5e9, 6e9, 64)
    z = np.exp(1j * f / 1e9) * 0.7
    path = tmp_path / "t.csv"
    write_trace_csv(path, f, z)
    assert path.read_text().splitlines()[0] == "freq_hz,re_s21,im_s21"
    f2, z2 = read_trace_csv(path)
    assert np.array_equal(f, f2)
    assert np.array_equal(z, z2)


def test_design_check_default_scenario_passes(capsys):
    assert main(["design-check"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["all_passed"]
    assert len(out["devices"]) == 11


def test_design_check_reports_failing_ratio(tmp_path, capsys):
    cfg = default_config()
    cfg["devices"] = [
        {"device_id": "X-ctrl", "sample_id": "X", "kind": "control",
         "f1_target_ghz": 5.8},
        {"device_id": "X-big", "sample_id": "X", "kind": "jer",
         "jj_count": 2, "jj_area_um2": 1.2, "f1_target_ghz": 5.8},
    ]
    # low critical-current density pushes the ratio to roughly 0.20
    cfg["critical_current_density_ua_per_um2"] = 0.33
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code = main(["design-check", "--config", str(path)])
    out = json.loads(capsys.readouterr().out)
    by_id = {d["device_id"]: d for d in out["devices"]}
    if code == 0:
        pytest.fail("expected the oversized junction to fail the design rule")
    assert not by_id["X-big"]["passed"]
    assert by_id["X-big"]["inductance_ratio"] > 0.15


def test_missing_config_gives_exit_code_two(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert err["error"] == "ConfigError"


def test_simulate_outputs(sim_dir):
    meta, entries = read_manifest(sim_dir)
    assert len(entries) == 11 * 2 * 20
    assert meta["temperature_k"] == pytest.approx(0.015)
    for e in entries[:5]:
        assert (sim_dir / e["file"]).exists()
    # ground truth is written alongside
    assert (sim_dir / "ground_truth.json").exists()
    assert (sim_dir / "run_manifest.json").exists()


def test_fundamentals_in_window_from_files(sim_dir):
    meta, entries = read_manifest(sim_dir)
    for e in entries:
        if e["harmonic"] != 1:
            continue
        f, _ = read_trace_csv(sim_dir / e["file"])
        center = 0.5 * (f[0] + f[-1])
        assert 5.55e9 < center < 6.15e9


def _tree_hash(root, skip=("run_manifest.json",)):
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        if path.is_dir() or path.name in skip:
            continue
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def test_simulate_byte_identical_for_same_seed(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--out", str(a), "--seed", "5"]) == 0
    assert main(["simulate", "--out", str(b), "--seed", "5"]) == 0
    assert _tree_hash(a) == _tree_hash(b)
    c = tmp_path / "c"
    assert main(["simulate", "--out", str(c), "--seed", "6"]) == 0
    assert _tree_hash(a) != _tree_hash(c)


def test_analyze_outputs(sim_dir, tmp_path):
    out = tmp_path / "analysis"
    assert main(["analyze", "--in", str(sim_dir), "--out", str(out)]) == 0
    report = json.loads((out / "extraction_report.json").read_text())
    assert report["slope_1h"]["slope"] == pytest.approx(1.61e-8, rel=0.15)
    assert report["mean_2h"]["mean"] == pytest.approx(1.61e-6, rel=0.15)
    with (out / "delta_table.csv").open() as fh:
        rows = {r["device_id"]: r for r in csv.DictReader(fh)}
    assert float(rows["A-dummy"]["delta_hz"]) < 0.0
    assert int(rows["A-dummy"]["coupling_limited"]) == 1
    with (out / "gamma_tj.csv").open() as fh:
        header = fh.readline().strip()
    assert header == "device_id,harmonic,a_tj,gamma_tj,sigma"
    assert (out / "gamma_lp.csv").exists()


def test_analyze_never_reads_ground_truth(sim_dir, tmp_path):
    import shutil

    clone = tmp_path / "no_truth"
    shutil.copytree(sim_dir, clone)
    (clone / "ground_truth.json").unlink()
    out = tmp_path / "no_truth_analysis"
    assert main(["analyze", "--in", str(clone), "--out", str(out)]) == 0
    assert (out / "extraction_report.json").exists()


def test_analyze_missing_controls_aborts_with_data_error(sim_dir, tmp_path, capsys):
    import shutil

    clone = tmp_path / "no_controls"
    shutil.copytree(sim_dir, clone)
    manifest = json.loads((clone / "sweep_manifest.json").read_text())
    manifest["traces"] = [e for e in manifest["traces"]
                          if e["kind"] != "control"]
    (clone / "sweep_manifest.json").write_text(json.dumps(manifest))
    out = tmp_path / "no_controls_analysis"
    assert main(["analyze", "--in", str(clone), "--out", str(out)]) == 3
    err = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert "control" in err["message"]


def test_analyze_missing_trace_file_is_data_error(sim_dir, tmp_path, capsys):
    import shutil

    clone = tmp_path / "missing_file"
    shutil.copytree(sim_dir, clone)
    entries = json.loads((clone / "sweep_manifest.json").read_text())
    (clone / entries["traces"][0]["file"]).unlink()
    out = tmp_path / "missing_file_analysis"
    assert main(["analyze", "--in", str(clone), "--out", str(out)]) == 3


def test_fit_nonconvergence_maps_to_exit_four(monkeypatch, tmp_path):
    from jerkit import cli
    from jerkit.exceptions import FitConvergenceError

    def explode(*args, **kwargs):
        raise FitConvergenceError("stalled", last_residual=0.5)

    monkeypatch.setattr(cli, "analyze_directory", explode)
    assert main(["analyze", "--in", str(tmp_path), "--out",
                 str(tmp_path / "o")]) == 4


def test_parallel_analysis_matches_serial(sim_dir, tmp_path):
    out1 = tmp_path / "serial"
    out2 = tmp_path / "parallel"
    assert main(["analyze", "--in", str(sim_dir), "--out", str(out1)]) == 0
    assert main(["analyze", "--in", str(sim_dir), "--out", str(out2),
                 "--jobs", "2"]) == 0
    a = (out1 / "extraction_report.json").read_text()
    b = (out2 / "extraction_report.json").read_text()
    assert a == b


# ---------------------------------------------------------------------------
# standalone interface formats


def test_device_document_loader():
    from jerkit.io import circuit_from_config

    circuit = circuit_from_config({
        "feed_z0_ohm": 50.0,
        "c_couple_ff": 2.0,
        "l_couple_nh": 2.0,
        "line": {"z0_ohm": 80.0, "v_ph_m_per_s": 1.2e8,
                 "length_um": 10256.0, "alpha_np_per_m": 3.1e-5},
        "junction": {"count": 2, "area_um2": 10.0, "l_tj_nh": 0.0658,
                     "c_shunt_ff": 0.2},
        "temperature_mk": 15.0,
    })
    assert circuit.total_length == pytest.approx(10256e-6)
    assert circuit.junction.l_total == pytest.approx(6.58e-11)
    assert circuit.temperature == pytest.approx(0.015)

    from jerkit.exceptions import ConfigError
    with pytest.raises(ConfigError, match="lacks key"):
        circuit_from_config({"line": {}})


def test_power_dependence_csv_round_trip(tmp_path):
    from jerkit.io import read_power_dependence_csv, write_power_dependence_csv
    from jerkit.tlsfit import PowerDependence, fit_power_dependence
    from jerkit.io import tls_result_to_json

    n_p = np.logspace(-1, 4, 12)
    data = PowerDependence(n_p=n_p, gamma=2e-6 / np.sqrt(1 + n_p / 30.0),
                           sigma_gamma=np.full(12, 2e-8), f=6e9,
                           temperature=0.015)
    path = tmp_path / "dep.csv"
    write_power_dependence_csv(path, data)
    back = read_power_dependence_csv(path, f=6e9, temperature=0.015)
    assert np.array_equal(back.n_p, data.n_p)
    assert np.array_equal(back.gamma, data.gamma)

    record = tls_result_to_json(fit_power_dependence(back))
    for key in ("gamma0", "n_c", "alpha_exp", "gamma_ext", "gamma_lp",
                "ext_pinned", "covariance", "residual_chi2"):
        assert key in record
    assert json.dumps(record)  # serializable


def test_device_record_json_round_trip():
    from jerkit.extraction import DeviceRecord, Uncertain
    from jerkit.io import record_from_json, record_to_json

    record = DeviceRecord(device_id="A-jj2", sample_id="A", kind="jer",
                          jj_count=2, a_tj=20.0,
                          gamma_lp_1h=Uncertain(5.2e-7, 8e-9),
                          gamma_lp_2h=Uncertain(1.71e-6, 1e-8),
                          l_tj=6.6e-11)
    back = record_from_json(record_to_json(record))
    assert back == record
