"""Modeling and loss-extraction toolkit for junction-embedded resonators."""

__version__ = "0.1.0"

from .circuit import JerCircuit, JunctionArray, LineSpec, branch_impedance, s21
from .extraction import DeviceRecord, Uncertain, extract_report
from .modes import (
    HarmonicPair,
    design_check,
    find_harmonics,
    invert_l_tj,
    mode_profile,
    participation_ratios,
    predict_mode_loss,
    transcendental_modes,
)
from .notchfit import PowerSweepTrace, ResonanceFit, fit_notch, photon_number
from .synth import Scenario, build_scenario, default_config, generate_trace
from .tlsfit import (
    PowerDependence,
    TlsFitResult,
    fit_power_dependence,
    gamma_lp,
    tls_saturation_loss,
)

__all__ = [
    "JerCircuit", "JunctionArray", "LineSpec", "branch_impedance", "s21",
    "HarmonicPair", "find_harmonics", "transcendental_modes", "invert_l_tj",
    "mode_profile", "participation_ratios", "predict_mode_loss",
    "design_check", "PowerSweepTrace", "ResonanceFit", "fit_notch",
    "photon_number", "PowerDependence", "TlsFitResult",
    "tls_saturation_loss", "fit_power_dependence", "gamma_lp",
    "DeviceRecord", "Uncertain", "extract_report", "Scenario",
    "default_config", "build_scenario", "generate_trace",
]
