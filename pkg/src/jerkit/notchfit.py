"""Notch-geometry resonance fitting with diameter correction.

Extracts f_r, Q_l, |Q_c|, the impedance-mismatch angle phi, and hence
Q_i (and the loss rate Gamma = 1/Q_i) from a complex transmission trace

    S21(f) = a * exp(j*alpha0) * exp(-2*pi*j*f*tau)
             * [1 - (Q_l/|Q_c|) * exp(j*phi) / (1 + 2j*Q_l*(f/f_r - 1))].

The pipeline is cable-delay estimation from the off-resonant wings,
algebraic circle fit, phase-vs-frequency fit for (f_r, Q_l), diameter
correction for (|Q_c|, phi), and a final joint nonlinear refinement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .constants import HBAR
from .exceptions import DataError, FitConvergenceError, FitError, NoResonanceError

__all__ = [
    "PowerSweepTrace",
    "Background",
    "ResonanceFit",
    "notch_s21",
    "fit_notch",
    "photon_number",
]


@dataclass(frozen=True)
class PowerSweepTrace:
    """Complex S21 versus frequency at one applied power.

    freqs : Hz, strictly increasing
    s21 : complex transmission samples
    applied_power : W at the device input
    """

    freqs: np.ndarray
    s21: np.ndarray
    applied_power: float
    device_id: str = ""
    harmonic: int = 1

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        z = np.asarray(self.s21, dtype=complex)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "s21", z)
        if freqs.ndim != 1 or freqs.size < 50 or z.shape != freqs.shape:
            raise DataError("trace needs matching 1-d arrays of length >= 50")
        if np.any(np.diff(freqs) <= 0):
            raise DataError("trace frequencies must be strictly increasing")
        if not self.applied_power > 0:
            raise DataError("applied power must be > 0")
        if self.harmonic not in (1, 2):
            raise DataError("harmonic must be 1 or 2")


@dataclass(frozen=True)
class Background:
    """Instrumental background of one trace."""

    amplitude: float
    phase_offset: float
    cable_delay: float


@dataclass(frozen=True)
class ResonanceFit:
    """Fitted resonance parameters; gamma = 1/q_i is the loss rate."""

    f_r: float
    q_l: float
    q_c_mag: float
    phi: float
    q_i: float
    background: Background
    residual_rms: float
    gamma_err: float = float("nan")

    def __post_init__(self):
        if self.q_i <= 0:
            raise FitError("internal quality factor must be positive")

    @property
    def gamma(self) -> float:
        return 1.0 / self.q_i


def notch_s21(f, f_r, q_l, q_c_mag, phi=0.0, amplitude=1.0, phase_offset=0.0,
              delay=0.0):
    """Evaluate the diameter-corrected notch model."""
    f = np.asarray(f, dtype=float)
    env = amplitude * np.exp(1j * (phase_offset - 2.0 * np.pi * f * delay))
    den = 1.0 + 2j * q_l * (f / f_r - 1.0)
    return env * (1.0 - (q_l / q_c_mag) * np.exp(1j * phi) / den)


# ---------------------------------------------------------------------------
# pipeline stages


def _estimate_delay(f, z, wing_frac=0.2):
    """Cable delay from the linear phase slope of the off-resonant wings."""
    k = max(int(round(f.size * wing_frac / 2)), 5)
    slopes = []
    for sl in (slice(0, k), slice(f.size - k, None)):
        ph = np.unwrap(np.angle(z[sl]))
        slopes.append(np.polyfit(f[sl], ph, 1)[0])
    return -0.5 * (slopes[0] + slopes[1]) / (2.0 * np.pi)


def _fit_circle(z):
    """Taubin algebraic circle fit; returns (center, radius)."""
    x, y = z.real, z.imag
    xm, ym = x.mean(), y.mean()
    u, v = x - xm, y - ym
    q = u * u + v * v
    muu, mvv, muv = (u * u).mean(), (v * v).mean(), (u * v).mean()
    muq, mvq, mqq = (u * q).mean(), (v * q).mean(), (q * q).mean()
    mz = muu + mvv
    cov = muu * mvv - muv * muv
    a3 = 4.0 * mz
    a2 = -3.0 * mz * mz - mqq
    a1 = (mqq - mz * mz) * mz + 4.0 * cov * mz - muq * muq - mvq * mvq
    a0 = (muq * muq * mvv + mvq * mvq * muu - mqq * cov
          - 2.0 * muq * mvq * muv + mz * mz * cov)
    t = 0.0
    for _ in range(30):
        num = a0 + t * (a1 + t * (a2 + t * a3))
        den = a1 + t * (2.0 * a2 + 3.0 * a3 * t)
        if den == 0.0:
            break
        step = num / den
        t -= step
        if abs(step) < 1e-14 * max(abs(t), 1.0):
            break
    det = t * t - t * mz + cov
    if det == 0.0:
        raise FitError("degenerate circle fit")
    xc = (muq * (mvv - t) - mvq * muv) / (2.0 * det)
    yc = (mvq * (muu - t) - muq * muv) / (2.0 * det)
    radius = math.sqrt(xc * xc + yc * yc + mz + 2.0 * t)
    return complex(xc + xm, yc + ym), radius


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _fit_phase(f, zc, fr0, ql0, th0):
    """Fit theta(f) = th0 + 2*arctan(2*Q_l*(1 - f/f_r)) on centered data.

    Only initializes the joint refinement, so the data is thinned to a
    few hundred points.
    """
    stride = max(f.size // 250, 1)
    f, ph = f[::stride], np.angle(zc[::stride])

    def residuals(p):
        model = p[2] + 2.0 * np.arctan(2.0 * p[1] * (1.0 - f / p[0]))
        return _wrap_angle(ph - model)

    def jac(p):
        x = 1.0 - f / p[0]
        den = 1.0 + (2.0 * p[1] * x) ** 2
        d_fr = -(2.0 / den) * (2.0 * p[1] * f / p[0] ** 2)
        d_ql = -(2.0 / den) * (2.0 * x)
        return np.stack([d_fr, d_ql, -np.ones_like(f)], axis=1)

    sol = least_squares(residuals, [fr0, ql0, th0], jac=jac,
                        x_scale=[fr0, max(ql0, 1.0), 1.0], max_nfev=400)
    return sol.x


def _initial_dip(f, z):
    """Dip location, loaded-Q estimate, and wing baseline from |S21|."""
    mag = np.abs(z)
    k = max(f.size // 10, 5)
    baseline = np.median(np.concatenate([mag[:k], mag[-k:]]))
    i_min = int(np.argmin(mag))
    depth = baseline - mag[i_min]
    if baseline <= 0 or mag[i_min] / baseline > 0.99:
        raise NoResonanceError("no resonance dip found in trace")
    half = baseline - 0.5 * depth
    right = np.nonzero(mag[i_min:] > half)[0]
    left = np.nonzero(mag[:i_min + 1][::-1] > half)[0]
    f_hi = f[i_min + right[0]] if right.size else f[-1]
    f_lo = f[i_min - left[0]] if left.size else f[0]
    width = max(f_hi - f_lo, 2.0 * (f[1] - f[0]))
    return f[i_min], f[i_min] / width, baseline, depth


# ---------------------------------------------------------------------------
# joint refinement


def _model_and_jacobian(p, f, f_ref):
    # background phase is referenced to the window center f_ref; the
    # absolute convention alpha0 - 2*pi*f*tau is degenerate between
    # alpha0 and tau at microwave frequencies
    f_r, q_l, q_c, phi, amp, alpha_c, tau = p
    env = amp * np.exp(1j * (alpha_c - 2.0 * np.pi * (f - f_ref) * tau))
    den = 1.0 + 2j * q_l * (f / f_r - 1.0)
    kfac = (q_l / q_c) * np.exp(1j * phi)
    res = 1.0 - kfac / den
    model = env * res
    d_fr = env * kfac / den**2 * (-2j * q_l * f / f_r**2)
    d_ql = env * (-np.exp(1j * phi) / (q_c * den**2))
    d_qc = env * kfac / (q_c * den)
    d_phi = env * (-1j * kfac / den)
    d_amp = model / amp
    d_alpha = 1j * model
    d_tau = -2j * np.pi * (f - f_ref) * model
    jac = np.stack([d_fr, d_ql, d_qc, d_phi, d_amp, d_alpha, d_tau], axis=1)
    return model, jac


def _joint_refine(f, z, p0, max_nfev):
    f_ref = 0.5 * (f[0] + f[-1])

    def residuals(p):
        model, _ = _model_and_jacobian(p, f, f_ref)
        d = model - z
        return np.concatenate([d.real, d.imag])

    def jac(p):
        _, j = _model_and_jacobian(p, f, f_ref)
        return np.concatenate([j.real, j.imag])

    lo = [f[0], 1.0, 1.0, -np.pi, 1e-12, -2 * np.pi, -np.inf]
    hi = [f[-1], 1e12, 1e14, np.pi, np.inf, 2 * np.pi, np.inf]
    p0 = np.clip(p0, lo, hi)
    sol = least_squares(residuals, p0, jac=jac, bounds=(lo, hi),
                        x_scale="jac", max_nfev=max_nfev)
    if sol.status <= 0:
        raise FitConvergenceError(
            "joint notch refinement did not converge",
            last_residual=float(np.sqrt(np.mean(sol.fun**2))),
        )
    return sol, f_ref


def fit_notch(trace: PowerSweepTrace, max_nfev: int = 1000) -> ResonanceFit:
    """Fit the notch model to one trace.

    Raises NoResonanceError when the trace has no dip, FitConvergenceError
    when the bounded refinement stalls, and FitError for fits violating
    1/q_i >= 0.  A residual RMS above 0.1 of the background amplitude is
    flagged with a warning rather than silently accepted.
    """
    f, z = trace.freqs, trace.s21
    f_dip, ql_est, baseline, depth = _initial_dip(f, z)

    tau = _estimate_delay(f, z)
    z1 = z * np.exp(2j * np.pi * tau * f)
    center, radius = _fit_circle(z1)
    zc = z1 - center
    th0 = float(np.angle(zc[np.argmin(np.abs(z1))]))
    fr, ql, th = _fit_phase(f, zc, f_dip, ql_est, th0)
    p_off = center - radius * np.exp(1j * th)
    amp = abs(p_off)
    r_norm = radius / amp
    phi = float(np.angle(1.0 - center / p_off))
    qc = max(ql / (2.0 * r_norm), 1.0)
    f_ref0 = 0.5 * (f[0] + f[-1])
    alpha_c = float(_wrap_angle(np.angle(p_off) - 2.0 * np.pi * tau * f_ref0))

    sol, f_ref = _joint_refine(f, z, [fr, ql, qc, phi, amp, alpha_c, tau],
                               max_nfev)
    f_r, q_l, q_c, phi, amp, alpha_c, tau = sol.x
    alpha0 = float(_wrap_angle(alpha_c + 2.0 * np.pi * tau * f_ref))

    inv_qi = 1.0 / q_l - math.cos(phi) / q_c
    if inv_qi <= 0.0:
        raise FitError("fit rejected: 1/q_i = 1/q_l - cos(phi)/|q_c| <= 0")
    if not (f[0] <= f_r <= f[-1]):
        raise FitError("fitted resonance lies outside the trace span")

    n_res = sol.fun.size
    rms = float(np.sqrt(np.mean(sol.fun**2) * 2.0)) / amp
    if rms > 0.1:
        warnings.warn(
            f"notch fit residual rms {rms:.3f} exceeds 0.1, trace flagged",
            stacklevel=2,
        )

    gamma_err = float("nan")
    try:
        jtj = sol.jac.T @ sol.jac
        sigma2 = 2.0 * sol.cost / max(n_res - 7, 1)
        cov = np.linalg.inv(jtj) * sigma2
        grad = np.zeros(7)
        grad[1] = -1.0 / q_l**2
        grad[2] = math.cos(phi) / q_c**2
        grad[3] = math.sin(phi) / q_c
        gamma_err = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    except np.linalg.LinAlgError:
        pass

    return ResonanceFit(
        f_r=float(f_r),
        q_l=float(q_l),
        q_c_mag=float(q_c),
        phi=float(phi),
        q_i=float(1.0 / inv_qi),
        background=Background(amplitude=float(amp), phase_offset=float(alpha0),
                              cable_delay=float(tau)),
        residual_rms=rms,
        gamma_err=gamma_err,
    )


def photon_number(fit: ResonanceFit, applied_power: float) -> float:
    """Average intracavity photon number at the given applied power (W).

    <n_p> = 2 * Q_l^2 * P / (|Q_c| * hbar * w_r^2), the steady-state
    occupation of a side-coupled resonator driven on resonance.
    """
    if not applied_power > 0:
        raise DataError("applied power must be > 0")
    if fit.q_l > fit.q_c_mag * (1.0 + 1e-6):
        raise FitError("quality-factor ordering violated: q_l > |q_c|")
    w_r = 2.0 * math.pi * fit.f_r
    return 2.0 * fit.q_l**2 * applied_power / (fit.q_c_mag * HBAR * w_r**2)
