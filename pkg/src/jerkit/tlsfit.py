"""Power dependence of the internal loss rate.

Fits Gamma(<n_p>) with the saturable two-level-system model

    Gamma = Gamma_0 * tanh(h*f / (2*k_B*T)) / sqrt(1 + (<n_p>/n_c)^alpha)
            + Gamma_ext

and reports the low-power saturation level
Gamma_LP = Gamma_0 * tanh(h*f/(2*k_B*T)) + Gamma_ext.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .constants import BOLTZMANN_K, PLANCK_H
from .exceptions import DataError, FitConvergenceError
from .notchfit import ResonanceFit, photon_number

__all__ = [
    "PowerDependence",
    "TlsFitResult",
    "thermal_tanh_factor",
    "tls_saturation_loss",
    "fit_power_dependence",
    "gamma_lp",
    "bootstrap_gamma_lp",
    "assemble_power_dependence",
]


def thermal_tanh_factor(f: float, temperature: float) -> float:
    """tanh(h*f / (2*k_B*T)), the thermal depolarization factor."""
    if f <= 0 or temperature <= 0:
        raise DataError("tanh factor needs f > 0 and temperature > 0")
    return math.tanh(PLANCK_H * f / (2.0 * BOLTZMANN_K * temperature))


def tls_saturation_loss(gamma0, n_c, alpha_exp, gamma_ext, n_p, f, temperature):
    """Evaluate the saturable loss model at photon number(s) n_p.

    Strictly decreasing in n_p for gamma0 > 0 and approaching gamma_ext
    as n_p grows without bound.
    """
    if gamma0 <= 0 or n_c <= 0 or gamma_ext < 0:
        raise DataError("model needs gamma0 > 0, n_c > 0, gamma_ext >= 0")
    if not 0.0 < alpha_exp <= 2.0:
        raise DataError("exponent must lie in (0, 2]")
    n_p = np.asarray(n_p, dtype=float)
    if np.any(n_p < 0):
        raise DataError("photon number must be >= 0")
    tanh_f = thermal_tanh_factor(f, temperature)
    return gamma0 * tanh_f / np.sqrt(1.0 + (n_p / n_c) ** alpha_exp) + gamma_ext


@dataclass(frozen=True)
class PowerDependence:
    """Loss rate versus photon number of one device and harmonic."""

    n_p: np.ndarray
    gamma: np.ndarray
    sigma_gamma: np.ndarray
    f: float
    temperature: float
    device_id: str = ""
    harmonic: int = 1

    def __post_init__(self):
        n = np.asarray(self.n_p, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        s = np.asarray(self.sigma_gamma, dtype=float)
        if not (n.shape == g.shape == s.shape) or n.ndim != 1:
            raise DataError("power dependence needs matching 1-d arrays")
        order = np.argsort(n)
        n, g, s = n[order], g[order], s[order]
        if np.any(n <= 0) or np.any(np.diff(n) <= 0):
            raise DataError("photon numbers must be positive and distinct")
        if np.any(g <= 0) or np.any(s <= 0):
            raise DataError("loss rates and their uncertainties must be > 0")
        object.__setattr__(self, "n_p", n)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "sigma_gamma", s)

    @property
    def decades(self) -> float:
        return math.log10(self.n_p[-1] / self.n_p[0])


@dataclass(frozen=True)
class TlsFitResult:
    """Fitted saturation-model parameters.

    covariance is 4x4 over (gamma0, n_c, alpha_exp, gamma_ext), or 3x3
    over the first three when gamma_ext was pinned to zero.
    residual_chi2 is the reduced chi^2 of the weighted fit.
    """

    gamma0: float
    n_c: float
    alpha_exp: float
    gamma_ext: float
    ext_pinned: bool
    covariance: np.ndarray
    residual_chi2: float
    f: float
    temperature: float
    flags: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.gamma0 <= 0 or self.n_c <= 0:
            raise DataError("fit result needs gamma0 > 0 and n_c > 0")
        if not 0.0 < self.alpha_exp <= 2.0:
            raise DataError("fitted exponent must lie in (0, 2]")
        if self.gamma_ext < 0:
            raise DataError("gamma_ext must be >= 0")

    @property
    def gamma_lp(self) -> float:
        """Low-power saturation level, recomputed from the fields."""
        return self.gamma0 * thermal_tanh_factor(self.f, self.temperature) \
            + self.gamma_ext


# ---------------------------------------------------------------------------
# fitting

_NC_STARTS = np.logspace(-1, 6, 8)
# the exponent floor keeps the optimizer off the flat-data ridge where a
# vanishing exponent mimics any plateau level
_ALPHA_MIN = 0.1
_BOUNDS_FREE = ([1e-12, 1e-4, _ALPHA_MIN, 0.0], [1.0, 1e9, 2.0, 1.0])
_BOUNDS_PINNED = ([1e-12, 1e-4, _ALPHA_MIN], [1.0, 1e9, 2.0])


def _check_monotonic(data: PowerDependence):
    """Warn when Gamma rises with power by more than 3 sigma."""
    g, s = data.gamma, data.sigma_gamma
    run_min = np.minimum.accumulate(g)
    run_sig = np.minimum.accumulate(s)
    excess = (g - run_min) / np.hypot(s, run_sig)
    if np.any(excess > 3.0):
        warnings.warn(
            f"{data.device_id or 'dataset'}: loss rises with power beyond "
            "3 sigma, fit attempted anyway",
            stacklevel=3,
        )
        return ("nonmonotonic",)
    return ()


def _solve(data: PowerDependence, pinned: bool):
    n, g, s = data.n_p, data.gamma, data.sigma_gamma
    tanh_f = thermal_tanh_factor(data.f, data.temperature)
    plateau = float(np.average(g[: max(3, g.size // 5)]))
    floor0 = float(min(0.8 * g.min(), plateau)) if not pinned else 0.0
    gamma0_0 = max((plateau - floor0) / tanh_f, 1e-12)
    log_n = np.log(n)

    def residuals(p):
        gamma_ext = 0.0 if pinned else p[3]
        model = p[0] * tanh_f / np.sqrt(1.0 + (n / p[1]) ** p[2]) + gamma_ext
        return (model - g) / s

    def jac(p):
        u = (n / p[1]) ** p[2]
        root = np.sqrt(1.0 + u)
        shape = tanh_f / root
        curve = p[0] * tanh_f * u / (2.0 * root**3)
        cols = [shape / s,
                (curve * p[2] / p[1]) / s,
                (-curve * (log_n - math.log(p[1]))) / s]
        if not pinned:
            cols.append(np.ones_like(n) / s)
        return np.stack(cols, axis=1)

    bounds = _BOUNDS_PINNED if pinned else _BOUNDS_FREE
    best = None
    for nc0 in _NC_STARTS:
        x0 = [gamma0_0, nc0, 1.0] + ([] if pinned else [floor0])
        x0 = np.clip(x0, bounds[0], bounds[1])
        try:
            sol = least_squares(residuals, x0, jac=jac, bounds=bounds,
                                x_scale="jac", max_nfev=400)
        except Exception:
            continue
        if sol.status > 0 and (best is None or sol.cost < best.cost):
            best = sol
    if best is None:
        raise FitConvergenceError("saturation fit failed from every start")
    return best


def _covariance(sol, n_points, n_params):
    dof = max(n_points - n_params, 1)
    chi2_dof = 2.0 * sol.cost / dof
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    return cov, chi2_dof


def fit_power_dependence(data: PowerDependence) -> TlsFitResult:
    """Weighted bounded fit of the saturation model with multi-start.

    Eight starts on a log-spaced n_c grid avoid local minima.  Both the
    free fit and a gamma_ext = 0 fit are run; the free floor is kept
    only when the data resolves saturation, meaning the extra parameter
    lowers chi^2 by more than 4 and the fitted gamma_ext exceeds its own
    1-sigma uncertainty.  Otherwise ("not reaching saturation"),
    gamma_ext is pinned to 0.  The decision is deterministic for
    identical data.
    """
    if data.n_p.size < 6:
        raise DataError("need at least 6 points for a fit attempt")
    if data.decades < 3.0:
        raise DataError("need at least 3 decades of photon number")
    flags = _check_monotonic(data)

    free = _solve(data, pinned=False)
    pinned = _solve(data, pinned=True)
    cov_free, chi2_free = _covariance(free, data.n_p.size, 4)
    sigma_ext = math.sqrt(max(cov_free[3, 3], 0.0))
    delta_chi2 = 2.0 * (pinned.cost - free.cost)
    floor_resolved = (
        np.isfinite(sigma_ext) and free.x[3] > sigma_ext and delta_chi2 > 4.0
    )
    pin = not floor_resolved

    if pin:
        sol = pinned
        cov, chi2 = _covariance(sol, data.n_p.size, 3)
        gamma0, n_c, alpha_exp = sol.x
        gamma_ext = 0.0
    else:
        sol, cov, chi2 = free, cov_free, chi2_free
        gamma0, n_c, alpha_exp, gamma_ext = sol.x

    return TlsFitResult(
        gamma0=float(gamma0),
        n_c=float(n_c),
        alpha_exp=float(alpha_exp),
        gamma_ext=float(gamma_ext),
        ext_pinned=pin,
        covariance=cov,
        residual_chi2=float(chi2),
        f=data.f,
        temperature=data.temperature,
        flags=flags,
    )


def gamma_lp(result: TlsFitResult):
    """Low-power saturation level and its propagated 1-sigma uncertainty."""
    tanh_f = thermal_tanh_factor(result.f, result.temperature)
    value = result.gamma0 * tanh_f + result.gamma_ext
    grad = np.zeros(result.covariance.shape[0])
    grad[0] = tanh_f
    if not result.ext_pinned:
        grad[3] = 1.0
    sigma = math.sqrt(max(grad @ result.covariance @ grad, 0.0))
    return value, sigma


def bootstrap_gamma_lp(data: PowerDependence, n_resamples: int = 200,
                       seed: int = 0):
    """Bootstrap (resample points with replacement) spread of Gamma_LP."""
    rng = np.random.default_rng(seed)
    values = []
    n = data.n_p.size
    for _ in range(n_resamples):
        idx = np.unique(rng.integers(0, n, n))
        if idx.size < 6 or math.log10(data.n_p[idx[-1]] / data.n_p[idx[0]]) < 3:
            continue
        sample = PowerDependence(
            n_p=data.n_p[idx], gamma=data.gamma[idx],
            sigma_gamma=data.sigma_gamma[idx], f=data.f,
            temperature=data.temperature, device_id=data.device_id,
            harmonic=data.harmonic,
        )
        try:
            values.append(fit_power_dependence(sample).gamma_lp)
        except (DataError, FitConvergenceError):
            continue
    if len(values) < max(10, n_resamples // 10):
        raise FitConvergenceError("too few successful bootstrap resamples")
    return float(np.std(values, ddof=1))


def assemble_power_dependence(fits, powers, f, temperature, device_id="",
                              harmonic=1) -> PowerDependence:
    """Build a PowerDependence from per-power resonance fits.

    fits : sequence of ResonanceFit
    powers : matching applied powers (W)
    """
    n_p = np.array([photon_number(ft, p) for ft, p in zip(fits, powers)])
    gamma = np.array([ft.gamma for ft in fits])
    sigma = np.array([ft.gamma_err for ft in fits])
    if np.any(~np.isfinite(sigma)) or np.any(sigma <= 0):
        fallback = np.nanmedian(sigma[np.isfinite(sigma) & (sigma > 0)])
        if not np.isfinite(fallback):
            fallback = 0.03 * float(np.median(gamma))
        sigma = np.where(np.isfinite(sigma) & (sigma > 0), sigma, fallback)
    return PowerDependence(n_p=n_p, gamma=gamma, sigma_gamma=sigma, f=f,
                           temperature=temperature, device_id=device_id,
                           harmonic=harmonic)
