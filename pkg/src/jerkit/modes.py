"""Harmonic analysis of the embedded-junction resonator.

Covers resonance search on the simulated transmission, the analytic
transcendental oracle for the decoupled lossless limit, inversion of the
junction inductance from the two harmonic frequencies, standing-wave
profiles, participation ratios, perturbative loss prediction, and the
design-rule check.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, brentq, minimize_scalar

from .circuit import JerCircuit, LineSpec, resonator_abcd, s21
from .exceptions import (
    AmbiguousResonancesError,
    CircuitError,
    DataError,
    ProfileError,
)

__all__ = [
    "HarmonicPair",
    "ModeProfile",
    "ParticipationRatios",
    "LossBudget",
    "DesignReport",
    "InductanceEstimate",
    "transcendental_modes",
    "find_harmonics",
    "invert_l_tj",
    "mode_profile",
    "participation_ratios",
    "predict_mode_loss",
    "design_check",
]


@dataclass(frozen=True)
class HarmonicPair:
    """First two harmonic frequencies of one device (Hz)."""

    f_1h: float
    f_2h: float

    def __post_init__(self):
        if not (0.0 < self.f_1h < self.f_2h):
            raise DataError("harmonics require 0 < f_1h < f_2h")

    @property
    def delta(self) -> float:
        """Harmonic offset, 0.5 * f_2h - f_1h (Hz), always recomputed."""
        return 0.5 * self.f_2h - self.f_1h


# ---------------------------------------------------------------------------
# analytic oracle for the decoupled lossless limit


def transcendental_modes(left: LineSpec, right: LineSpec, l_tj: float):
    """Exact mode pair of the decoupled lossless device.

    The odd (1st) harmonic solves w * l_tj = 2 * z0 * cot(beta*l/2) with
    beta = 2*pi*f/v_ph and l the total length; the even (2nd) harmonic
    is v_ph / l exactly because the junction carries no current there.

    Returns (f_1h, f_2h) in Hz, the root located to better than 1 Hz.
    """
    if left.alpha != 0.0 or right.alpha != 0.0:
        raise CircuitError("transcendental oracle requires lossless lines")
    if (left.z0, left.v_ph, left.length) != (right.z0, right.v_ph, right.length):
        raise CircuitError("transcendental oracle requires identical halves")
    if l_tj < 0:
        raise CircuitError("junction inductance must be >= 0")

    length = left.length + right.length
    f_2h = left.v_ph / length
    if l_tj == 0.0:
        return 0.5 * f_2h, f_2h

    def residual(f):
        # w*L - 2*z0*cot(pi*f/f_2h); sign change brackets the odd mode
        return 2.0 * math.pi * f * l_tj - 2.0 * left.z0 / math.tan(math.pi * f / f_2h)

    # a fundamental below 5% of the even mode would need several hundred
    # times the line inductance; treat that as a parameter error
    lo, hi = 0.05 * f_2h, 0.5 * f_2h
    if residual(lo) >= 0.0:
        raise CircuitError("junction inductance unphysically large for this line")
    f_1h = bisect(residual, lo, hi, xtol=0.05)
    return f_1h, f_2h


# ---------------------------------------------------------------------------
# resonance search


def _resonance_objective(circuit: JerCircuit, f):
    """|S21| for coupled circuits, |C| of the open-open chain otherwise."""
    if circuit.is_coupled:
        return np.abs(s21(circuit, f))
    return np.abs(resonator_abcd(circuit, f)[2])


def _refine_minimum(fun, lo, hi):
    # minimize in an offset variable; Brent's relative tolerance floor
    # (sqrt(eps) * |x|) would otherwise cap the precision near 100 Hz
    mid = 0.5 * (lo + hi)
    res = minimize_scalar(lambda u: fun(mid + u), bounds=(lo - mid, hi - mid),
                          method="bounded", options={"xatol": 0.25})
    return float(mid + res.x)


def find_harmonics(circuit: JerCircuit, search_band, n_grid: int = 20001) -> HarmonicPair:
    """Locate the first two resonances inside ``search_band``.

    A coarse grid scan of the resonance objective (|S21| dips for a
    coupled device, |C| zeros of the open-open chain for a decoupled
    one) marks strict local minima, each refined by bracketed scalar
    minimization to 1 Hz.  Exactly two dips must be found.
    """
    f_lo, f_hi = float(search_band[0]), float(search_band[1])
    if not (0.0 < f_lo < f_hi):
        raise DataError("search band must satisfy 0 < f_lo < f_hi")
    if n_grid < 101:
        raise DataError("resonance grid needs at least 101 points")

    grid = np.linspace(f_lo, f_hi, n_grid)
    vals = _resonance_objective(circuit, grid)
    interior = (vals[1:-1] < vals[:-2]) & (vals[1:-1] < vals[2:])
    idx = np.nonzero(interior)[0] + 1
    if circuit.is_coupled:
        # reject grid-level ripples that are not actual dips
        idx = idx[1.0 - vals[idx] > 1e-6]
    else:
        idx = idx[vals[idx] < 0.5 * np.median(vals)]

    fun = lambda f: float(_resonance_objective(circuit, np.float64(f)))
    found = []
    for i in idx:
        f_star = _refine_minimum(fun, grid[i - 1], grid[i + 1])
        if all(abs(f_star - g) > 10.0 for g in found):
            found.append(f_star)
    found.sort()

    if len(found) != 2:
        raise AmbiguousResonancesError(
            f"expected exactly 2 resonances in band, found {len(found)}", found
        )
    return HarmonicPair(f_1h=found[0], f_2h=found[1])


# ---------------------------------------------------------------------------
# inductance inversion


@dataclass(frozen=True)
class InductanceEstimate:
    """Junction inductance recovered from the two harmonic frequencies.

    coupling_limited marks frequency pairs with f_1h >= f_2h/2, where
    the offset is within coupling systematics and the inductance is
    clamped to zero instead of going negative.
    """

    l_tj: float
    coupling_limited: bool


def invert_l_tj(f_1h: float, f_2h: float, line: LineSpec,
                circuit: JerCircuit | None = None) -> InductanceEstimate:
    """Recover the total junction inductance from (f_1h, f_2h).

    Closed form for the decoupled ideal:
    L = 2 * z0 * cot(pi * f_1h / f_2h) / (2*pi*f_1h).  When a coupled
    circuit template is supplied the estimate is refined by root-finding
    so that the simulated f_1h matches the measured one within 1 kHz.
    """
    if not (0.0 < f_1h < f_2h):
        raise DataError("inversion requires 0 < f_1h < f_2h")
    ratio = math.pi * (f_1h / f_2h)
    if ratio >= 0.5 * math.pi:
        return InductanceEstimate(l_tj=0.0, coupling_limited=True)
    l_closed = 2.0 * line.z0 / (math.tan(ratio) * 2.0 * math.pi * f_1h)
    if circuit is None:
        return InductanceEstimate(l_tj=l_closed, coupling_limited=False)

    band = (0.5 * f_1h, 1.15 * f_2h)

    def f1_error(l_val):
        trial = dataclasses.replace(
            circuit, junction=dataclasses.replace(circuit.junction, l_total=l_val)
        )
        return find_harmonics(trial, band).f_1h - f_1h

    lo, hi = 0.0, max(4.0 * l_closed, 1e-12)
    if f1_error(lo) < 0.0:
        # measured f_1h above the zero-inductance prediction: coupling floor
        return InductanceEstimate(l_tj=0.0, coupling_limited=True)
    # the simulated f_1h decreases with inductance; expand until bracketed
    while f1_error(hi) > 0.0:
        hi *= 2.0
        if hi > 1e-6:
            raise DataError("inductance refinement failed to bracket f_1h")
    l_ref = brentq(f1_error, lo, hi, xtol=1e-16, rtol=1e-12)
    if abs(f1_error(l_ref)) > 1e3:
        raise DataError("refined inductance misses f_1h by more than 1 kHz")
    return InductanceEstimate(l_tj=l_ref, coupling_limited=False)


# ---------------------------------------------------------------------------
# standing-wave profile


@dataclass(frozen=True)
class ModeProfile:
    """Sampled (V, I) standing wave of one mode.

    positions run from the coupled end (x = 0) to the open end
    (x = total length), with the junction node duplicated at the
    midpoint so each half can be integrated separately.  The open end
    is the normalization anchor, V = 1 V, I = 0.
    """

    freq: float
    positions: np.ndarray
    voltage: np.ndarray
    current: np.ndarray
    junction_current: complex
    junction_node_voltage: complex       # open-end side of the series element
    junction_node_voltage_feed: complex  # feed side of the series element

    @property
    def junction_voltage_drop(self) -> complex:
        """Voltage across the series junction element."""
        return self.junction_node_voltage_feed - self.junction_node_voltage


def _transfer_states(circuit: JerCircuit, f: float, n_half: int):
    """Propagate (V, I) from the open end through both halves."""
    w = 2.0 * math.pi * f
    j = circuit.junction
    y_half = 0.5 * (j.g_shunt + 1j * w * j.c_shunt)
    z_j = j.r_series + 1j * w * j.l_total

    d = np.linspace(0.0, circuit.right.length, n_half)

    def line_states(spec, dist, v0, i0):
        gd = (spec.alpha + 2j * np.pi * f / spec.v_ph) * dist
        ch, sh = np.cosh(gd), np.sinh(gd)
        return ch * v0 + spec.z0 * sh * i0, sh * v0 / spec.z0 + ch * i0

    # right half, measured from the open end inward
    v_r, i_r = line_states(circuit.right, d, 1.0, 0.0)
    v_node_open, i_into = v_r[-1], i_r[-1]
    i_j = i_into + y_half * v_node_open
    v_node_feed = v_node_open + z_j * i_j
    i_left = i_j + y_half * v_node_feed
    # left half, measured from the junction toward the coupled end
    v_l, i_l = line_states(circuit.left, d, v_node_feed, i_left)
    return d, (v_r, i_r), (v_l, i_l), i_j, v_node_open, v_node_feed


def _nearest_resonance(circuit: JerCircuit, f_guess: float):
    """Refine the resonance nearest f_guess and estimate its linewidth."""
    lo, hi = f_guess * 0.99, f_guess * 1.01
    fun = lambda f: float(_resonance_objective(circuit, np.float64(f)))
    f_star = _refine_minimum(fun, lo, hi)
    if circuit.is_coupled:
        depth = 1.0 - fun(f_star)
        if depth <= 0.0:
            return f_star, 0.0
        target = 1.0 - 0.5 * depth

        def crossing(side):
            a, b = (f_star, hi) if side > 0 else (lo, f_star)
            g = lambda f: fun(f) - target
            try:
                return brentq(g, a, b, xtol=1.0)
            except ValueError:
                return f_star + side * 0.01 * f_star
        width = crossing(+1) - crossing(-1)
        return f_star, abs(width)
    return f_star, 0.0


def mode_profile(circuit: JerCircuit, mode_f: float, n_points: int = 801) -> ModeProfile:
    """Standing-wave distribution at a resonance returned by find_harmonics.

    Raises ProfileError when mode_f is farther than 10 linewidths from
    the nearest resonance (with a 1e-6 relative floor for nearly
    lossless circuits).
    """
    if n_points < 16:
        raise DataError("profile needs at least 16 points")
    f_star, width = _nearest_resonance(circuit, mode_f)
    tol = max(10.0 * width, 1e-6 * f_star + 10.0)
    if abs(mode_f - f_star) > tol:
        raise ProfileError(
            f"{mode_f:.3f} Hz is not within 10 linewidths of a resonance "
            f"(nearest at {f_star:.3f} Hz)"
        )

    n_half = max(n_points // 2 + 1, 8)
    d, (v_r, i_r), (v_l, i_l), i_j, v_open, v_feed = _transfer_states(
        circuit, mode_f, n_half
    )
    half = circuit.left.length
    # left half runs feed -> junction, right half junction -> open end
    x_left = half - d[::-1]
    x_right = half + (circuit.right.length - d[::-1])
    positions = np.concatenate([x_left, x_right])
    voltage = np.concatenate([v_l[::-1], v_r[::-1]])
    current = np.concatenate([i_l[::-1], i_r[::-1]])
    return ModeProfile(
        freq=mode_f,
        positions=positions,
        voltage=voltage,
        current=current,
        junction_current=complex(i_j),
        junction_node_voltage=complex(v_open),
        junction_node_voltage_feed=complex(v_feed),
    )


# ---------------------------------------------------------------------------
# energies, participation, loss


@dataclass(frozen=True)
class ParticipationRatios:
    """Mode-energy shares of the lumped junction elements."""

    p_inductive: float
    p_shunt_electric: float
    p_line: float
    energy_total: float


def _energy_terms(profile: ModeProfile, circuit: JerCircuit):
    """Time-averaged energies: per-half line integrals plus lumped terms."""
    n_half = profile.positions.size // 2
    x, v, i = profile.positions, profile.voltage, profile.current

    def half_energy(sl, spec):
        dens = 0.25 * spec.l_per_m * np.abs(i[sl]) ** 2 \
            + 0.25 * spec.c_per_m * np.abs(v[sl]) ** 2
        return np.trapezoid(dens, x[sl])

    e_line = half_energy(slice(0, n_half), circuit.left) \
        + half_energy(slice(n_half, None), circuit.right)
    j = circuit.junction
    e_ind = 0.25 * j.l_total * abs(profile.junction_current) ** 2
    e_cap = 0.25 * 0.5 * j.c_shunt * (
        abs(profile.junction_node_voltage) ** 2
        + abs(profile.junction_node_voltage_feed) ** 2
    )
    return e_line, e_ind, e_cap


def participation_ratios(profile: ModeProfile, circuit: JerCircuit) -> ParticipationRatios:
    """Energy participation of the junction inductance and shunt capacitance.

    All participations plus the line share sum to one by construction.
    """
    e_line, e_ind, e_cap = _energy_terms(profile, circuit)
    total = e_line + e_ind + e_cap
    if total <= 0.0 or np.max(np.abs(profile.voltage)) == 0.0:
        raise DataError("profile carries no energy")
    return ParticipationRatios(
        p_inductive=e_ind / total,
        p_shunt_electric=e_cap / total,
        p_line=e_line / total,
        energy_total=total,
    )


@dataclass(frozen=True)
class LossBudget:
    """Predicted dimensionless loss rate 1/Q_i and its channel split."""

    total: float
    junction_internal: float
    junction_external: float
    line: float


def predict_mode_loss(circuit: JerCircuit, mode_f: float,
                      n_points: int = 801,
                      allow_fallback: bool = True) -> LossBudget:
    """Perturbative loss rate of one mode, Gamma = P_diss / (w * E_stored).

    Dissipation combines the series junction resistance, the split shunt
    conductance, and the line attenuation (entered half as series
    resistance alpha*z0 and half as shunt conductance alpha/z0 per unit
    length, which reproduces Gamma_line = 2*alpha/beta on a bare line).
    Valid in the small-loss regime; above Gamma = 1e-2 the estimate
    falls back to a full transmission circle fit with a warning (or
    keeps the perturbative value when allow_fallback is off).
    """
    profile = mode_profile(circuit, mode_f, n_points)
    e_line, e_ind, e_cap = _energy_terms(profile, circuit)
    e_total = e_line + e_ind + e_cap
    if e_total <= 0.0:
        raise DataError("profile carries no energy")
    w = 2.0 * math.pi * mode_f

    j = circuit.junction
    p_int = 0.5 * j.r_series * abs(profile.junction_current) ** 2
    p_ext = 0.5 * 0.5 * j.g_shunt * (
        abs(profile.junction_node_voltage) ** 2
        + abs(profile.junction_node_voltage_feed) ** 2
    )

    n_half = profile.positions.size // 2
    x, v, i = profile.positions, profile.voltage, profile.current

    def half_power(sl, spec):
        dens = 0.5 * (spec.alpha * spec.z0) * np.abs(i[sl]) ** 2 \
            + 0.5 * (spec.alpha / spec.z0) * np.abs(v[sl]) ** 2
        return np.trapezoid(dens, x[sl])

    p_line = half_power(slice(0, n_half), circuit.left) \
        + half_power(slice(n_half, None), circuit.right)

    denom = w * e_total
    budget = LossBudget(
        total=(p_int + p_ext + p_line) / denom,
        junction_internal=p_int / denom,
        junction_external=p_ext / denom,
        line=p_line / denom,
    )
    if budget.total >= 1e-2:
        warnings.warn(
            "loss outside the perturbative regime; falling back to a full "
            "transmission fit",
            stacklevel=2,
        )
        if not allow_fallback:
            return budget
        if not circuit.is_coupled:
            raise CircuitError(
                "large-loss fallback needs a coupled circuit to fit S21"
            )
        return dataclasses.replace(budget, total=_fit_total_loss(circuit, mode_f))
    return budget


def _fit_total_loss(circuit: JerCircuit, mode_f: float) -> float:
    """Full S21 circle fit around mode_f, returning 1/Q_i."""
    from .notchfit import PowerSweepTrace, fit_notch

    f_star, width = _nearest_resonance(circuit, mode_f)
    width = max(width, 1e-7 * f_star)
    freqs = np.linspace(f_star - 10 * width, f_star + 10 * width, 1001)
    trace = PowerSweepTrace(freqs=freqs, s21=s21(circuit, freqs),
                            applied_power=1e-15)
    return fit_notch(trace).gamma


# ---------------------------------------------------------------------------
# design rule


@dataclass(frozen=True)
class DesignReport:
    """Perturbation budget of the embedded junction."""

    inductance_ratio: float
    voltage_drop_ratio: float
    passed: bool


def design_check(circuit: JerCircuit) -> DesignReport:
    """Check that the junction only perturbs the bare resonator.

    inductance_ratio compares the junction inductance against the
    effective lumped inductance of the fundamental,
    L_eff = (2/pi^2) * L' * l; the device passes when the ratio stays
    at or below 0.15.  voltage_drop_ratio reports the voltage across
    the junction relative to the 1st-harmonic anti-node amplitude.
    """
    spec = circuit.left
    l_eff = (2.0 / math.pi**2) * spec.l_per_m * circuit.total_length
    ratio = circuit.junction.l_total / l_eff
    passed = ratio <= 0.15 * (1.0 + 1e-9)

    if circuit.junction.l_total == 0.0 and circuit.junction.r_series == 0.0:
        return DesignReport(inductance_ratio=ratio, voltage_drop_ratio=0.0,
                            passed=passed)

    f2_bare = spec.v_ph / circuit.total_length
    pair = find_harmonics(circuit, (0.05 * f2_bare, 1.1 * f2_bare))
    profile = mode_profile(circuit, pair.f_1h)
    drop = abs(profile.junction_voltage_drop) / np.max(np.abs(profile.voltage))
    return DesignReport(inductance_ratio=ratio, voltage_drop_ratio=float(drop),
                        passed=passed)
