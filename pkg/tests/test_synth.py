import dataclasses

import numpy as np
import pytest

from jerkit.exceptions import BuildError, DataError
from jerkit.modes import design_check
from jerkit.notchfit import fit_notch
from jerkit.synth import (
    build_scenario,
    default_config,
    generate_trace,
    junction_inductance,
)


def test_junction_inductance_from_critical_current():
    # 2 junctions of 10 um^2 at 1 uA/um^2: I_c = 10 uA each
    l_tj = junction_inductance(2, 10.0, 1.0)
    assert l_tj == pytest.approx(2 * 2.067833848e-15 / (2 * np.pi * 1e-5),
                                 rel=1e-12)
    assert junction_inductance(0, 0.0, 1.0) == 0.0


def test_injected_internal_rate_scales_with_area(default_scenario):
    # per-area rate 1.61e-8: a 20 um^2 device carries 3.22e-7
    by_id = {d.device_id: d for d in default_scenario.devices}
    b2 = by_id["B-jj2"]
    assert b2.circuit.junction.a_total == 20.0
    assert b2.truth_1h.gamma_internal == pytest.approx(3.22e-7, rel=1e-6)
    for dev in default_scenario.devices:
        if dev.kind != "jer":
            continue
        target = 1.61e-8 * dev.circuit.junction.a_total
        assert dev.truth_1h.gamma_internal == pytest.approx(target, rel=1e-6)


def test_injected_external_rate_area_independent(default_scenario):
    values = [d.truth_2h.gamma_external for d in default_scenario.devices
              if d.kind == "jer"]
    assert len(values) == 5
    for v in values:
        assert v == pytest.approx(1.61e-6, rel=1e-6)


def test_dummy_gets_no_junction_loss(default_scenario):
    for dev in default_scenario.devices:
        if dev.kind in ("dummy", "control"):
            for truth in (dev.truth_1h, dev.truth_2h):
                assert truth.gamma_internal == 0.0
                assert truth.gamma_external == 0.0


def test_doubling_area_doubles_internal_injection_only():
    cfg = default_config()
    cfg["devices"] = [d for d in cfg["devices"]
                      if d["sample_id"] == "A" or d["kind"] == "control"]
    base = build_scenario(cfg)
    doubled_cfg = default_config()
    doubled_cfg["devices"] = []
    for d in cfg["devices"]:
        d = dict(d)
        if d["kind"] == "jer":
            d["jj_area_um2"] = 2.0 * d["jj_area_um2"]
        doubled_cfg["devices"].append(d)
    doubled = build_scenario(doubled_cfg)
    for b, d in zip(base.devices, doubled.devices):
        if b.kind != "jer":
            continue
        assert d.truth_1h.gamma_internal == pytest.approx(
            2.0 * b.truth_1h.gamma_internal, rel=1e-6)
        assert d.truth_2h.gamma_external == pytest.approx(
            b.truth_2h.gamma_external, rel=1e-6)


def test_default_scenario_meets_design_rule(default_scenario):
    for dev in default_scenario.devices:
        assert design_check(dev.circuit).passed


def test_fundamentals_in_reported_window(default_scenario):
    for dev in default_scenario.devices:
        assert 5.6e9 <= dev.truth_1h.freq <= 6.1e9


def test_offset_signs_mirror_experiment(default_scenario):
    for dev in default_scenario.devices:
        delta = dev.harmonics.delta
        if dev.kind == "jer":
            assert delta > 0.0
        else:
            assert delta < 0.0


def test_same_seed_bit_identical(default_scenario):
    dev = default_scenario.devices[3]
    t1, _ = generate_trace(default_scenario, dev, 1, 2)
    t2, _ = generate_trace(default_scenario, dev, 1, 2)
    assert np.array_equal(t1.s21, t2.s21)
    other = dataclasses.replace(default_scenario, seed=999)
    t3, _ = generate_trace(other, dev, 1, 2)
    assert not np.array_equal(t1.s21, t3.s21)


def test_noiseless_high_power_leaves_line_plus_external(default_scenario):
    quiet = dataclasses.replace(default_scenario, noise_sigma=0.0)
    dev = next(d for d in quiet.devices if d.device_id == "A-jjL")
    top = len(quiet.powers_w) - 1
    # 2nd harmonic: the saturable junction channel is negligible there
    trace, truth = generate_trace(quiet, dev, 2, top)
    fit = fit_notch(trace)
    residual = dev.truth_2h.gamma_line + dev.truth_2h.gamma_external
    assert fit.gamma == pytest.approx(residual, rel=0.02)
    # 1st harmonic: saturation removes most of the injected internal loss
    trace1, truth1 = generate_trace(quiet, dev, 1, top)
    fit1 = fit_notch(trace1)
    floor1 = dev.truth_1h.gamma_line + dev.truth_1h.gamma_external
    assert fit1.gamma - floor1 < 0.02 * dev.truth_1h.gamma_internal
    assert fit1.gamma == pytest.approx(floor1, rel=0.10)


def test_noiseless_round_trip_recovers_shape_parameters(default_scenario):
    import math

    quiet = dataclasses.replace(default_scenario, noise_sigma=0.0)
    dev = next(d for d in quiet.devices if d.device_id == "A-jjM")
    trace, truth = generate_trace(quiet, dev, 1, 0)
    fit = fit_notch(trace)
    t = dev.truth_1h
    assert fit.f_r == pytest.approx(t.freq, rel=1e-7)
    assert fit.q_c_mag == pytest.approx(t.q_c_mag, rel=1e-3)
    assert fit.phi == pytest.approx(t.phi, abs=1e-3)
    q_l_expect = 1.0 / (truth["gamma_internal_total"]
                        + math.cos(t.phi) / t.q_c_mag)
    assert fit.q_l == pytest.approx(q_l_expect, rel=1e-3)
    assert fit.background.amplitude == pytest.approx(1.0, rel=1e-3)


def test_noisy_round_trip_q_i_scatter_tracks_conditioning(default_scenario):
    # this device is strongly overcoupled (Q_i about 10x |Q_c|), which
    # amplifies the 1/Q_l - cos(phi)/|Q_c| subtraction by that factor;
    # at sigma = 0.01 the per-trace loss error stays within a few percent
    noisy = dataclasses.replace(default_scenario, noise_sigma=0.01)
    dev = next(d for d in noisy.devices if d.device_id == "A-jjM")
    errs = []
    for seed in range(10):
        sc = dataclasses.replace(noisy, seed=seed)
        trace, truth = generate_trace(sc, dev, 1, 0)
        fit = fit_notch(trace)
        errs.append(abs(fit.gamma / truth["gamma_internal_total"] - 1.0))
    assert np.median(errs) < 0.03


def test_round_trip_gamma_lp_single_device(default_scenario):
    from jerkit.tlsfit import assemble_power_dependence, fit_power_dependence

    dev = next(d for d in default_scenario.devices if d.device_id == "B-jj4")
    fits, powers = [], []
    for ip, p in enumerate(default_scenario.powers_w):
        trace, _ = generate_trace(default_scenario, dev, 1, ip)
        fits.append(fit_notch(trace))
        powers.append(p)
    data = assemble_power_dependence(fits, powers, dev.truth_1h.freq,
                                     default_scenario.temperature)
    result = fit_power_dependence(data)
    assert result.gamma_lp == pytest.approx(dev.truth_1h.gamma_total, rel=0.10)


def test_photon_clamp_enforced(default_scenario):
    clamped = dataclasses.replace(default_scenario, max_photons=1.0)
    dev = clamped.devices[0]
    with pytest.raises(DataError, match="clamp"):
        generate_trace(clamped, dev, 1, len(clamped.powers_w) - 1)


def test_unsatisfiable_injection_is_a_build_error():
    cfg = default_config()
    cfg["devices"] = [d for d in cfg["devices"] if d["sample_id"] == "A"]
    cfg["external_rate"] = 5e-2  # beyond the perturbative regime
    with pytest.raises(BuildError):
        build_scenario(cfg)


def test_design_rule_violation_is_a_build_error():
    cfg = default_config()
    cfg["devices"] = [
        {"device_id": "X-big", "sample_id": "X", "kind": "jer",
         "jj_count": 2, "jj_area_um2": 1.0, "f1_target_ghz": 5.8},
    ]
    # 1 um^2 at 0.25 uA/um^2 gives about 1.3 nH on each junction
    cfg["critical_current_density_ua_per_um2"] = 0.25
    with pytest.raises(BuildError, match="design rule"):
        build_scenario(cfg)


def test_config_validation():
    cfg = default_config()
    del cfg["powers_dbm"]
    with pytest.raises(BuildError, match="powers_dbm"):
        build_scenario(cfg)
    cfg = default_config()
    cfg["devices"] = cfg["devices"] + [dict(cfg["devices"][0])]
    with pytest.raises(BuildError, match="unique"):
        build_scenario(cfg)
