"""Synthetic power-sweep generator with recorded ground truth.

Builds device circuits from a physical scenario description, solves the
junction loss channels so the injected 1st-harmonic loss equals a
per-area internal rate and the injected 2nd-harmonic loss equals an
area-independent external rate, then emits noisy transmission traces in
the same formats the analysis side reads.  Ground truth is written
alongside but never consumed downstream.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .circuit import JerCircuit, JunctionArray, LineSpec, s21
from .constants import FLUX_QUANTUM, HBAR
from .exceptions import BuildError, DataError
from .io import dbm_to_watt
from .modes import HarmonicPair, design_check, find_harmonics, predict_mode_loss
from .notchfit import PowerSweepTrace, fit_notch
from .tlsfit import thermal_tanh_factor

__all__ = [
    "TlsParams",
    "HarmonicTruth",
    "ScenarioDevice",
    "Scenario",
    "default_config",
    "build_scenario",
    "generate_trace",
    "generate_sweep",
]


@dataclass(frozen=True)
class TlsParams:
    n_c: float
    alpha_exp: float


@dataclass(frozen=True)
class HarmonicTruth:
    """Injected per-harmonic quantities of one device at zero power."""

    freq: float
    gamma_line: float
    gamma_internal: float
    gamma_external: float
    q_c_mag: float
    phi: float

    @property
    def gamma_total(self) -> float:
        return self.gamma_line + self.gamma_internal + self.gamma_external


@dataclass(frozen=True)
class ScenarioDevice:
    device_id: str
    sample_id: str
    kind: str
    circuit: JerCircuit
    harmonics: HarmonicPair
    truth_1h: HarmonicTruth
    truth_2h: HarmonicTruth
    tls: TlsParams
    line_saturable: bool

    def truth(self, harmonic: int) -> HarmonicTruth:
        return self.truth_1h if harmonic == 1 else self.truth_2h


@dataclass(frozen=True)
class Scenario:
    devices: tuple
    powers_w: tuple
    noise_sigma: float
    seed: int
    temperature: float
    max_photons: float
    saturable_internal: bool
    saturable_external: bool
    line_tls_floor: float
    line_z0: float
    feed_z0: float


def default_config() -> dict:
    """Built-in two-sample scenario.

    Sample A fixes the junction count at 2 and varies the area; sample
    B fixes the area and varies the count (2 and 4; a 6-junction
    variant is left out as unusable).  Each sample adds two plain
    control resonators and one dummy-stripe device, with fundamentals
    placed in the 5.6-6.1 GHz window.
    """
    devices = [
        {"device_id": "A-ctrl1", "sample_id": "A", "kind": "control", "f1_target_ghz": 5.62},
        {"device_id": "A-ctrl2", "sample_id": "A", "kind": "control", "f1_target_ghz": 5.70},
        {"device_id": "A-dummy", "sample_id": "A", "kind": "dummy", "f1_target_ghz": 5.78},
        {"device_id": "A-jjL", "sample_id": "A", "kind": "jer", "jj_count": 2,
         "jj_area_um2": 30.0, "f1_target_ghz": 5.86},
        {"device_id": "A-jjM", "sample_id": "A", "kind": "jer", "jj_count": 2,
         "jj_area_um2": 15.0, "f1_target_ghz": 5.94},
        {"device_id": "A-jjS", "sample_id": "A", "kind": "jer", "jj_count": 2,
         "jj_area_um2": 7.5, "f1_target_ghz": 6.02},
        {"device_id": "B-ctrl1", "sample_id": "B", "kind": "control", "f1_target_ghz": 5.66},
        {"device_id": "B-ctrl2", "sample_id": "B", "kind": "control", "f1_target_ghz": 5.74},
        {"device_id": "B-dummy", "sample_id": "B", "kind": "dummy", "f1_target_ghz": 5.82},
        {"device_id": "B-jj2", "sample_id": "B", "kind": "jer", "jj_count": 2,
         "jj_area_um2": 10.0, "f1_target_ghz": 5.90},
        {"device_id": "B-jj4", "sample_id": "B", "kind": "jer", "jj_count": 4,
         "jj_area_um2": 10.0, "f1_target_ghz": 5.98},
    ]
    return {
        "seed": 20260811,
        "feed_z0_ohm": 50.0,
        "line_z0_ohm": 80.0,
        "v_ph_m_per_s": 1.2e8,
        "line_alpha_np_per_m": 3.1e-5,
        "c_couple_ff": 2.0,
        "l_couple_nh": 2.0,
        "junction_c_shunt_ff": 0.2,
        "critical_current_density_ua_per_um2": 1.0,
        "temperature_mk": 15.0,
        "internal_rate_per_um2": 1.61e-8,
        "external_rate": 1.61e-6,
        "tls_n_c": 20.0,
        "tls_alpha_exp": 1.0,
        "saturable_internal": True,
        "saturable_external": False,
        "line_saturable_controls": True,
        "line_tls_floor_fraction": 0.3,
        "noise_sigma": 0.004,
        "powers_dbm": {"start_dbm": -158.0, "stop_dbm": -101.0, "num": 20},
        "max_photons": 1e6,
        "devices": devices,
    }


# ---------------------------------------------------------------------------
# scenario construction


def junction_inductance(count: int, area_um2: float, jc_ua_per_um2: float) -> float:
    """Series junction-chain inductance from the critical current density.

    L = count * Phi_0 / (2*pi*Jc*A) with Jc*A the per-junction critical
    current.
    """
    if count == 0:
        return 0.0
    i_c = jc_ua_per_um2 * 1e-6 * area_um2
    if i_c <= 0:
        raise BuildError("junction critical current must be > 0")
    return count * FLUX_QUANTUM / (2.0 * math.pi * i_c)


def _length_for_target(f1_target: float, l_tj: float, z0: float, v_ph: float) -> float:
    """Total length placing the decoupled loaded fundamental at f1_target."""
    if l_tj == 0.0:
        return v_ph / (2.0 * f1_target)
    theta = math.atan(2.0 * z0 / (2.0 * math.pi * f1_target * l_tj))
    return theta * v_ph / (math.pi * f1_target)


def _powers_from_config(cfg) -> tuple:
    spec = cfg["powers_dbm"]
    if isinstance(spec, dict):
        dbms = np.linspace(spec["start_dbm"], spec["stop_dbm"], int(spec["num"]))
    else:
        dbms = np.asarray(spec, dtype=float)
    if dbms.size < 1:
        raise BuildError("scenario needs at least one power")
    return tuple(dbm_to_watt(d) for d in dbms)


def _search_band(circuit: JerCircuit):
    f2_bare = circuit.left.v_ph / circuit.total_length
    return (0.08 * f2_bare, 1.12 * f2_bare)


def _probe_coupling(circuit, f_m, gamma_total):
    """Fit |Q_c| and phi from a noiseless trace around one resonance."""
    from .modes import _nearest_resonance

    f_star, width = _nearest_resonance(circuit, f_m)
    width = max(width, gamma_total * f_star, 1e-8 * f_star)
    freqs = np.linspace(f_star - 10 * width, f_star + 10 * width, 1001)
    trace = PowerSweepTrace(freqs=freqs, s21=s21(circuit, freqs),
                            applied_power=1e-15)
    fit = fit_notch(trace)
    return fit.q_c_mag, fit.phi


def _build_device(dev_cfg: dict, cfg: dict,
                  enforce_design_rule: bool = True) -> ScenarioDevice:
    kind = dev_cfg["kind"]
    if kind not in ("control", "dummy", "jer"):
        raise BuildError(f"unknown device kind {kind!r}")
    z0 = float(cfg["line_z0_ohm"])
    v_ph = float(cfg["v_ph_m_per_s"])
    alpha = float(cfg["line_alpha_np_per_m"])
    f1_target = float(dev_cfg["f1_target_ghz"]) * 1e9
    count = int(dev_cfg.get("jj_count", 0)) if kind == "jer" else 0
    area = float(dev_cfg.get("jj_area_um2", 0.0)) if kind == "jer" else 0.0
    l_tj = junction_inductance(
        count, area, float(cfg["critical_current_density_ua_per_um2"])
    )
    c_shunt = float(cfg["junction_c_shunt_ff"]) * 1e-15 if kind != "control" else 0.0

    def circuit_for(length_total: float) -> JerCircuit:
        half = LineSpec(z0=z0, v_ph=v_ph, length=0.5 * length_total, alpha=alpha)
        junction = JunctionArray(count=count, area_each=area, l_total=l_tj,
                                 c_shunt=c_shunt)
        return JerCircuit(
            feed_z0=float(cfg["feed_z0_ohm"]),
            c_couple=float(cfg["c_couple_ff"]) * 1e-15,
            l_couple=float(cfg["l_couple_nh"]) * 1e-9,
            left=half, right=half, junction=junction,
            temperature=float(cfg["temperature_mk"]) * 1e-3,
        )

    length = _length_for_target(f1_target, l_tj, z0, v_ph)
    circuit = circuit_for(length)
    pair = find_harmonics(circuit, _search_band(circuit))
    for _ in range(2):
        # compensate the coupler pull so the measured f_1h hits its target
        length *= pair.f_1h / f1_target
        circuit = circuit_for(length)
        pair = find_harmonics(circuit, _search_band(circuit))

    if kind == "jer" and enforce_design_rule:
        report = design_check(circuit)
        if not report.passed:
            raise BuildError(
                f"{dev_cfg['device_id']}: junction inductance ratio "
                f"{report.inductance_ratio:.3f} exceeds the 0.15 design rule"
            )

    internal_target = float(cfg["internal_rate_per_um2"]) * count * area \
        if kind == "jer" else 0.0
    external_target = float(cfg["external_rate"]) if kind == "jer" else 0.0

    def with_losses(r, g):
        return dataclasses.replace(
            circuit, junction=dataclasses.replace(
                circuit.junction, r_series=r, g_shunt=g))

    def perturbative(circ, f_m):
        # injection solving never wants the large-loss fit fallback; an
        # out-of-regime target becomes a build error below
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return predict_mode_loss(circ, f_m, allow_fallback=False)

    r_series = 0.0
    if internal_target > 0.0:
        probe = perturbative(with_losses(1e-3, 0.0), pair.f_1h)
        slope = probe.junction_internal / 1e-3
        r0 = internal_target / slope

        def internal_err(r):
            return perturbative(with_losses(r, 0.0), pair.f_1h) \
                .junction_internal - internal_target

        r_series = brentq(internal_err, 0.0, 2.0 * r0, rtol=1e-10)

    g_shunt = 0.0
    if external_target > 0.0:
        probe = perturbative(with_losses(r_series, 1e-7), pair.f_2h)
        slope = probe.junction_external / 1e-7
        g0 = external_target / slope

        def external_err(g):
            return perturbative(with_losses(r_series, g), pair.f_2h) \
                .junction_external - external_target

        g_shunt = brentq(external_err, 0.0, 2.0 * g0, rtol=1e-10)

    circuit = with_losses(r_series, g_shunt)
    budget_1h = perturbative(circuit, pair.f_1h)
    budget_2h = perturbative(circuit, pair.f_2h)
    for budget, target in ((budget_1h, internal_target),
                           (budget_2h, external_target)):
        if budget.total >= 1e-2:
            raise BuildError(
                f"{dev_cfg['device_id']}: injected loss leaves the "
                "perturbative regime"
            )

    q_c_1h, phi_1h = _probe_coupling(circuit, pair.f_1h, budget_1h.total)
    q_c_2h, phi_2h = _probe_coupling(circuit, pair.f_2h, budget_2h.total)

    tls = TlsParams(
        n_c=float(dev_cfg.get("tls_n_c", cfg["tls_n_c"])),
        alpha_exp=float(dev_cfg.get("tls_alpha_exp", cfg["tls_alpha_exp"])),
    )
    line_saturable = bool(dev_cfg.get(
        "line_saturable",
        cfg["line_saturable_controls"] if kind == "control" else False,
    ))
    return ScenarioDevice(
        device_id=str(dev_cfg["device_id"]),
        sample_id=str(dev_cfg["sample_id"]),
        kind=kind,
        circuit=circuit,
        harmonics=pair,
        truth_1h=HarmonicTruth(pair.f_1h, budget_1h.line,
                               budget_1h.junction_internal,
                               budget_1h.junction_external, q_c_1h, phi_1h),
        truth_2h=HarmonicTruth(pair.f_2h, budget_2h.line,
                               budget_2h.junction_internal,
                               budget_2h.junction_external, q_c_2h, phi_2h),
        tls=tls,
        line_saturable=line_saturable,
    )


def build_scenario(config: dict, enforce_design_rule: bool = True,
                   jobs: int = 1) -> Scenario:
    """Realize a scenario config into solved device circuits.

    With enforce_design_rule (the default), any junction device that
    breaks the 15% inductance rule aborts the build; the design-check
    command disables enforcement so it can report the failing ratios.
    Devices are independent, so jobs > 1 builds them in parallel with
    identical results.
    """
    required = (
        "seed", "feed_z0_ohm", "line_z0_ohm", "v_ph_m_per_s",
        "line_alpha_np_per_m", "c_couple_ff", "l_couple_nh",
        "junction_c_shunt_ff", "critical_current_density_ua_per_um2",
        "temperature_mk", "internal_rate_per_um2", "external_rate",
        "tls_n_c", "tls_alpha_exp", "noise_sigma", "powers_dbm",
        "max_photons", "devices",
    )
    missing = [k for k in required if k not in config]
    if missing:
        raise BuildError(f"scenario config lacks keys: {', '.join(missing)}")
    if not config["devices"]:
        raise BuildError("scenario needs at least one device")
    ids = [d.get("device_id") for d in config["devices"]]
    if len(set(ids)) != len(ids):
        raise BuildError("device ids must be unique")

    floor = float(config.get("line_tls_floor_fraction", 0.3))
    if not 0.0 <= floor < 1.0:
        raise BuildError("line_tls_floor_fraction must lie in [0, 1)")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            devices = tuple(pool.map(
                partial(_build_device, cfg=config,
                        enforce_design_rule=enforce_design_rule),
                config["devices"]))
    else:
        devices = tuple(_build_device(d, config, enforce_design_rule)
                        for d in config["devices"])
    return Scenario(
        devices=devices,
        powers_w=_powers_from_config(config),
        noise_sigma=float(config["noise_sigma"]),
        seed=int(config["seed"]),
        temperature=float(config["temperature_mk"]) * 1e-3,
        max_photons=float(config["max_photons"]),
        saturable_internal=bool(config.get("saturable_internal", True)),
        saturable_external=bool(config.get("saturable_external", False)),
        line_tls_floor=floor,
        line_z0=float(config["line_z0_ohm"]),
        feed_z0=float(config["feed_z0_ohm"]),
    )


# ---------------------------------------------------------------------------
# trace generation


def _loss_split(scenario: Scenario, device: ScenarioDevice, harmonic: int):
    """(saturable, fixed) zero-power loss shares of one harmonic.

    A saturable line keeps a non-saturable floor fraction, since only
    part of the distributed loss is of the saturable kind.
    """
    t = device.truth(harmonic)
    saturable = fixed = 0.0
    for part, sat in (
        (t.gamma_internal, scenario.saturable_internal),
        (t.gamma_external, scenario.saturable_external),
    ):
        if sat:
            saturable += part
        else:
            fixed += part
    if device.line_saturable:
        saturable += t.gamma_line * (1.0 - scenario.line_tls_floor)
        fixed += t.gamma_line * scenario.line_tls_floor
    else:
        fixed += t.gamma_line
    return saturable, fixed


def _self_consistent_photons(scenario, device, harmonic, power_w):
    """Fixed-point photon number; occupation sets Q_l which sets occupation."""
    t = device.truth(harmonic)
    tls = device.tls
    tanh_f = thermal_tanh_factor(t.freq, scenario.temperature)
    saturable, fixed = _loss_split(scenario, device, harmonic)
    kappa_c = math.cos(t.phi) / t.q_c_mag
    w2 = (2.0 * math.pi * t.freq) ** 2
    prefactor = 2.0 * power_w / (t.q_c_mag * HBAR * w2)

    def occupancy(n):
        s = tanh_f / math.sqrt(1.0 + (n / tls.n_c) ** tls.alpha_exp)
        q_l = 1.0 / (s * saturable + fixed + kappa_c)
        return prefactor * q_l * q_l, s

    n, _ = occupancy(0.0)
    for _ in range(50):
        target, s = occupancy(n)
        if abs(target - n) <= 1e-4 * n:
            return target, occupancy(target)[1]
        n = math.sqrt(n * target)  # damped update in log space
    raise DataError(
        f"photon-number fixed point did not converge at "
        f"{power_w:.3e} W ({device.device_id} h{harmonic})"
    )


def _rng_for(scenario, device, harmonic, power_index):
    key = zlib.crc32(device.device_id.encode())
    seq = np.random.SeedSequence(
        [scenario.seed, key, harmonic, power_index])
    return np.random.default_rng(seq)


def _scaled_circuit(scenario, device, s):
    j = device.circuit.junction
    r = j.r_series * s if scenario.saturable_internal else j.r_series
    g = j.g_shunt * s if scenario.saturable_external else j.g_shunt
    circ = dataclasses.replace(
        device.circuit, junction=dataclasses.replace(j, r_series=r, g_shunt=g))
    if device.line_saturable:
        f_line = scenario.line_tls_floor + (1.0 - scenario.line_tls_floor) * s
        circ = dataclasses.replace(
            circ,
            left=dataclasses.replace(circ.left, alpha=circ.left.alpha * f_line),
            right=dataclasses.replace(circ.right, alpha=circ.right.alpha * f_line),
        )
    return circ


def generate_trace(scenario: Scenario, device: ScenarioDevice, harmonic: int,
                   power_index: int):
    """One noisy trace plus its ground-truth record.

    The trace covers 10 linewidths on each side of the resonance with
    1001 points; complex Gaussian noise with per-quadrature standard
    deviation noise_sigma is drawn from an RNG keyed on
    (seed, device, harmonic, power index) so parallel and serial
    generation agree bit for bit.
    """
    if harmonic not in (1, 2):
        raise DataError("harmonic must be 1 or 2")
    power_w = scenario.powers_w[power_index]
    n_p, s = _self_consistent_photons(scenario, device, harmonic, power_w)
    if n_p > scenario.max_photons:
        raise DataError(
            f"{device.device_id} h{harmonic}: photon number {n_p:.3e} "
            f"exceeds the configured clamp {scenario.max_photons:.3e}"
        )
    t = device.truth(harmonic)
    saturable, fixed = _loss_split(scenario, device, harmonic)
    gamma_i = s * saturable + fixed
    q_l = 1.0 / (gamma_i + math.cos(t.phi) / t.q_c_mag)

    width = t.freq / q_l
    freqs = np.linspace(t.freq - 10 * width, t.freq + 10 * width, 1001)
    z = s21(_scaled_circuit(scenario, device, s), freqs)
    if scenario.noise_sigma > 0.0:
        rng = _rng_for(scenario, device, harmonic, power_index)
        z = z + scenario.noise_sigma * (
            rng.standard_normal(freqs.size)
            + 1j * rng.standard_normal(freqs.size)
        )
    trace = PowerSweepTrace(freqs=freqs, s21=z, applied_power=power_w,
                            device_id=device.device_id, harmonic=harmonic)
    truth = {
        "n_p": n_p,
        "tls_scale": s,
        "gamma_internal_total": gamma_i,
        "q_l": q_l,
    }
    return trace, truth


def generate_sweep(scenario: Scenario):
    """Yield (device, harmonic, power_index, trace, truth) for every tuple."""
    for device in scenario.devices:
        for harmonic in (1, 2):
            for ip in range(len(scenario.powers_w)):
                trace, truth = generate_trace(scenario, device, harmonic, ip)
                yield device, harmonic, ip, trace, truth


def scenario_ground_truth(scenario: Scenario) -> dict:
    """Scenario-level injected quantities for round-trip validation."""
    devices = {}
    for d in scenario.devices:
        devices[d.device_id] = {
            "kind": d.kind,
            "sample_id": d.sample_id,
            "jj_count": d.circuit.junction.count,
            "a_tj_um2": d.circuit.junction.a_total,
            "l_tj_h": d.circuit.junction.l_total,
            "r_series_ohm": d.circuit.junction.r_series,
            "g_shunt_s": d.circuit.junction.g_shunt,
            "f_1h_hz": d.harmonics.f_1h,
            "f_2h_hz": d.harmonics.f_2h,
            "gamma_1h": dataclasses.asdict(d.truth_1h),
            "gamma_2h": dataclasses.asdict(d.truth_2h),
            "tls_n_c": d.tls.n_c,
            "tls_alpha_exp": d.tls.alpha_exp,
            "line_saturable": d.line_saturable,
        }
    return {
        "seed": scenario.seed,
        "temperature_k": scenario.temperature,
        "devices": devices,
    }
