import numpy as np
import pytest

from jerkit.exceptions import DataError, FitError, NoResonanceError
from jerkit.notchfit import (
    Background,
    PowerSweepTrace,
    ResonanceFit,
    fit_notch,
    notch_s21,
    photon_number,
)

TRUE = dict(f_r=6e9, q_l=5e4, q_c_mag=1e5, phi=0.0, amplitude=0.8,
            phase_offset=0.4, delay=3e-8)


def make_trace(noise=0.0, seed=0, n=1001, n_linewidths=10, **overrides):
    p = dict(TRUE, **overrides)
    width = p["f_r"] / p["q_l"]
    f = np.linspace(p["f_r"] - n_linewidths * width,
                    p["f_r"] + n_linewidths * width, n)
    z = notch_s21(f, **p)
    if noise:
        rng = np.random.default_rng(seed)
        z = z + noise * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return PowerSweepTrace(freqs=f, s21=z, applied_power=1e-15)


def true_q_i(phi=0.0):
    return 1.0 / (1.0 / TRUE["q_l"] - np.cos(phi) / TRUE["q_c_mag"])


def test_model_depth_is_ql_over_qc():
    # symmetric notch: min |S21| = 1 - Q_l/Q_c
    val = notch_s21(np.array([TRUE["f_r"]]), TRUE["f_r"], 5e4, 1e5)
    assert abs(val[0]) == pytest.approx(0.5, abs=1e-12)


def test_noiseless_recovery_exact():
    fit = fit_notch(make_trace())
    assert fit.f_r == pytest.approx(TRUE["f_r"], rel=1e-6)
    assert fit.q_l == pytest.approx(TRUE["q_l"], rel=1e-6)
    assert fit.q_c_mag == pytest.approx(TRUE["q_c_mag"], rel=1e-6)
    assert fit.q_i == pytest.approx(true_q_i(), rel=1e-6)
    assert fit.background.amplitude == pytest.approx(0.8, rel=1e-6)
    assert fit.background.cable_delay == pytest.approx(3e-8, rel=1e-4)
    assert fit.residual_rms < 1e-8


def test_noisy_recovery_within_one_percent():
    errs = []
    for seed in range(40):
        fit = fit_notch(make_trace(noise=0.01, seed=seed))
        errs.append(abs(fit.q_i / true_q_i() - 1.0))
    assert np.median(errs) < 0.01


def test_mismatch_angle_corrected():
    fit = fit_notch(make_trace(phi=0.3))
    assert fit.phi == pytest.approx(0.3, abs=1e-6)
    assert fit.q_i == pytest.approx(true_q_i(0.3), rel=1e-6)
    # corrected estimator beats the symmetric-depth shortcut on noisy data
    errs, errs_naive = [], []
    for seed in range(25):
        trace = make_trace(phi=0.3, noise=0.01, seed=seed)
        fit = fit_notch(trace)
        errs.append(abs(fit.q_i / true_q_i(0.3) - 1.0))
        depth = 1.0 - np.min(np.abs(trace.s21)) / TRUE["amplitude"]
        q_i_naive = 1.0 / (1.0 / fit.q_l - depth / fit.q_l)
        errs_naive.append(abs(q_i_naive / true_q_i(0.3) - 1.0))
    assert np.median(errs) < 0.01
    assert np.median(errs) < np.median(errs_naive)


def test_fit_invariant_under_rotation_and_scaling():
    trace = make_trace(noise=0.005, seed=3)
    q_i_ref = fit_notch(trace).q_i
    rotated = PowerSweepTrace(freqs=trace.freqs,
                              s21=trace.s21 * 2.7 * np.exp(0.9j),
                              applied_power=trace.applied_power)
    assert fit_notch(rotated).q_i == pytest.approx(q_i_ref, rel=1e-4)


def test_downsampling_changes_q_i_little():
    trace = make_trace(n=2001)
    full = fit_notch(trace).q_i
    half = fit_notch(PowerSweepTrace(freqs=trace.freqs[::2],
                                     s21=trace.s21[::2],
                                     applied_power=1e-15)).q_i
    assert abs(half / full - 1.0) < 0.002


def test_no_resonance_raises():
    f = np.linspace(6e9 - 1e6, 6e9 + 1e6, 200)
    z = 0.8 * np.exp(1j * 0.1) * np.ones(f.size)
    with pytest.raises(NoResonanceError):
        fit_notch(PowerSweepTrace(freqs=f, s21=z, applied_power=1e-12))


def test_gamma_error_bar_is_sane():
    fits = [fit_notch(make_trace(noise=0.01, seed=s)) for s in range(25)]
    gammas = np.array([f.gamma for f in fits])
    errs = np.array([f.gamma_err for f in fits])
    spread = np.std(gammas, ddof=1)
    assert 0.3 * spread < np.median(errs) < 3.0 * spread


def test_model_mismatch_flagged_by_residual_rms():
    trace = make_trace()
    warped = PowerSweepTrace(
        freqs=trace.freqs,
        s21=trace.s21 * (1.0 + 0.3 * np.sin(np.linspace(0, 20, trace.freqs.size))),
        applied_power=1e-15,
    )
    with pytest.warns(UserWarning, match="exceeds 0.1"):
        fit = fit_notch(warped)
    assert fit.residual_rms > 0.1


def test_trace_validation():
    f = np.linspace(5e9, 6e9, 100)
    z = np.ones(100, dtype=complex)
    with pytest.raises(DataError):
        PowerSweepTrace(freqs=f[::-1], s21=z, applied_power=1e-12)
    with pytest.raises(DataError):
        PowerSweepTrace(freqs=f[:30], s21=z[:30], applied_power=1e-12)
    with pytest.raises(DataError):
        PowerSweepTrace(freqs=f, s21=z, applied_power=0.0)


# ---------------------------------------------------------------------------
# photon number


def ref_fit(f_r=6e9, q_l=1e5, q_c=2e5):
    q_i = 1.0 / (1.0 / q_l - 1.0 / q_c)
    return ResonanceFit(f_r=f_r, q_l=q_l, q_c_mag=q_c, phi=0.0, q_i=q_i,
                        background=Background(1.0, 0.0, 0.0),
                        residual_rms=0.0)


def test_photon_number_reference_value():
    # 2 Q_l^2 P / (Q_c hbar w^2) at f = 6 GHz, Q_l = 1e5, Q_c = 2e5,
    # P = 1e-17 W; frozen from the steady-state occupation formula
    assert photon_number(ref_fit(), 1e-17) == pytest.approx(6.672, rel=1e-3)


def test_photon_number_linear_in_power():
    n1 = photon_number(ref_fit(), 1e-17)
    n2 = photon_number(ref_fit(), 2e-17)
    assert n2 == 2.0 * n1


def test_quality_factor_ordering_enforced():
    bad = ResonanceFit(f_r=6e9, q_l=2.1e5, q_c_mag=2e5, phi=1.2,
                       q_i=1.0 / (1.0 / 2.1e5 - np.cos(1.2) / 2e5),
                       background=Background(1.0, 0.0, 0.0), residual_rms=0.0)
    with pytest.raises(FitError):
        photon_number(bad, 1e-17)
    with pytest.raises(DataError):
        photon_number(ref_fit(), 0.0)


def test_negative_internal_loss_rejected():
    with pytest.raises(FitError):
        ResonanceFit(f_r=6e9, q_l=1e5, q_c_mag=2e5, phi=0.0, q_i=-1e5,
                     background=Background(1.0, 0.0, 0.0), residual_rms=0.0)
