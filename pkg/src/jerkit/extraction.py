"""Cross-device loss extraction.

Subtracts the control-device baseline from each embedded-junction
resonator, regresses the 1st-harmonic excess loss against total junction
area (the current-driven channel) and averages the 2nd-harmonic excess
loss across samples (the field-driven channel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DataError

__all__ = [
    "Uncertain",
    "DeviceRecord",
    "GammaTjPoint",
    "RegressionResult",
    "ExternalAverage",
    "ExtractionReport",
    "baseline",
    "gamma_tj",
    "regress_internal",
    "average_external",
    "extract_report",
]

KINDS = ("control", "dummy", "jer")


class Uncertain(NamedTuple):
    value: float
    sigma: float


@dataclass(frozen=True)
class DeviceRecord:
    """Per-device summary entering the cross-device analysis.

    a_tj is the total junction area in um^2; None for controls, 0 for a
    dummy stripe, positive for a junction device.
    """

    device_id: str
    sample_id: str
    kind: str
    jj_count: int = 0
    a_tj: float | None = None
    gamma_lp_1h: Uncertain | None = None
    gamma_lp_2h: Uncertain | None = None
    l_tj: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown device kind {self.kind!r}")
        if self.kind == "control" and self.a_tj is not None:
            raise DataError("controls carry no junction area")
        if self.kind == "dummy" and self.a_tj not in (None, 0, 0.0):
            raise DataError("dummy devices have zero junction area")
        if self.kind == "jer" and not (self.a_tj and self.a_tj > 0):
            raise DataError("junction devices need a_tj > 0")

    def gamma_lp(self, harmonic: int) -> Uncertain | None:
        return self.gamma_lp_1h if harmonic == 1 else self.gamma_lp_2h


class GammaTjPoint(NamedTuple):
    device_id: str
    harmonic: int
    a_tj: float
    gamma_tj: float
    sigma: float


def _weighted_mean(values, sigmas) -> Uncertain:
    w = 1.0 / np.asarray(sigmas, dtype=float) ** 2
    v = np.asarray(values, dtype=float)
    mean = float(np.sum(w * v) / np.sum(w))
    return Uncertain(mean, float(1.0 / math.sqrt(np.sum(w))))


def baseline(records, harmonic: int) -> Uncertain:
    """Inverse-variance weighted mean loss of one sample's controls."""
    vals = [r.gamma_lp(harmonic) for r in records
            if r.kind == "control" and r.gamma_lp(harmonic) is not None]
    if len(vals) < 2:
        raise DataError(
            f"need at least 2 control records with harmonic {harmonic}, "
            f"got {len(vals)}"
        )
    return _weighted_mean([v.value for v in vals], [v.sigma for v in vals])


def gamma_tj(record: DeviceRecord, base: Uncertain, harmonic: int) -> Uncertain:
    """Net junction contribution, Gamma_LP minus the sample baseline.

    Negative values are retained (they reflect baseline fluctuation,
    not gain); uncertainties add in quadrature.
    """
    lp = record.gamma_lp(harmonic)
    if lp is None:
        raise DataError(f"{record.device_id} lacks harmonic {harmonic}")
    return Uncertain(lp.value - base.value, math.hypot(lp.sigma, base.sigma))


@dataclass(frozen=True)
class RegressionResult:
    """Weighted linear fit of loss against junction area.

    The through-origin slope is the headline number; the free-intercept
    fit is diagnostic.
    """

    slope: float
    slope_sigma: float
    chi2_dof: float
    intercept_slope: float
    intercept_slope_sigma: float
    intercept: float
    intercept_sigma: float


def regress_internal(points) -> RegressionResult:
    """Regress 1st-harmonic excess loss on total junction area (per um^2)."""
    pts = list(points)
    if len(pts) < 2:
        raise DataError("regression needs at least 2 points")
    x = np.array([p.a_tj for p in pts], dtype=float)
    y = np.array([p.gamma_tj for p in pts], dtype=float)
    s = np.array([p.sigma for p in pts], dtype=float)
    if np.unique(x).size < 2:
        raise DataError("regression needs at least 2 distinct areas")
    w = 1.0 / s**2

    sxx = np.sum(w * x * x)
    slope = float(np.sum(w * x * y) / sxx)
    slope_sigma = float(1.0 / math.sqrt(sxx))
    chi2_dof = float(np.sum(w * (y - slope * x) ** 2) / max(len(pts) - 1, 1))

    b, a, sb, sa = _free_line(x, y, w)
    return RegressionResult(
        slope=slope, slope_sigma=slope_sigma, chi2_dof=chi2_dof,
        intercept_slope=b, intercept_slope_sigma=sb,
        intercept=a, intercept_sigma=sa,
    )


def _free_line(x, y, w):
    """Weighted least squares y = a + b*x; returns (b, a, sigma_b, sigma_a)."""
    sw, swx, swy = np.sum(w), np.sum(w * x), np.sum(w * y)
    d = np.sum(w * (x - swx / sw) ** 2)
    if d <= 0:
        raise DataError("free-intercept fit needs at least 2 distinct x")
    b = float(np.sum(w * (x - swx / sw) * y) / d)
    a = float((swy - b * swx) / sw)
    return b, a, float(1.0 / math.sqrt(d)), float(math.sqrt(1.0 / sw + (swx / sw) ** 2 / d))


@dataclass(frozen=True)
class ExternalAverage:
    """Pooled 2nd-harmonic junction loss with its area-slope diagnostic."""

    mean: float
    sigma: float
    diag_slope: float
    diag_slope_sigma: float


def average_external(points) -> ExternalAverage:
    """Inverse-variance mean of the 2nd-harmonic excess loss across samples.

    Also fits a diagnostic line against area; consistency of that slope
    with zero supports an area-independent channel.
    """
    pts = list(points)
    if len(pts) < 2:
        raise DataError("external average needs at least 2 points")
    x = np.array([p.a_tj for p in pts], dtype=float)
    y = np.array([p.gamma_tj for p in pts], dtype=float)
    s = np.array([p.sigma for p in pts], dtype=float)
    mean = _weighted_mean(y, s)
    if np.unique(x).size >= 2:
        b, _, sb, _ = _free_line(x, y, 1.0 / s**2)
    else:
        b, sb = float("nan"), float("nan")
    return ExternalAverage(mean=mean.value, sigma=mean.sigma,
                           diag_slope=b, diag_slope_sigma=sb)


@dataclass(frozen=True)
class ExtractionReport:
    """Full cross-device analysis output."""

    baseline_1h: dict
    baseline_2h: dict
    gamma_tj_points: tuple
    slope_1h: RegressionResult
    mean_2h: ExternalAverage
    diagnostics: tuple = field(default_factory=tuple)


def extract_report(records) -> ExtractionReport:
    """Run the whole cross-device analysis on a set of device records.

    Baselines are computed per sample; the area regression and the
    2nd-harmonic average pool the junction devices of all samples.
    Dummy devices receive excess-loss points (diagnostics) but do not
    enter the regression or the average.
    """
    records = list(records)
    samples = sorted({r.sample_id for r in records})
    diagnostics = []
    base_1h, base_2h = {}, {}
    for sid in samples:
        group = [r for r in records if r.sample_id == sid]
        base_1h[sid] = baseline(group, 1)
        base_2h[sid] = baseline(group, 2)

    points = []
    for r in sorted(records, key=lambda r: r.device_id):
        if r.kind == "control":
            continue
        for harmonic, bases in ((1, base_1h), (2, base_2h)):
            lp = r.gamma_lp(harmonic)
            if lp is None:
                diagnostics.append(f"{r.device_id}: missing harmonic {harmonic}")
                continue
            g = gamma_tj(r, bases[r.sample_id], harmonic)
            if g.value < 0:
                diagnostics.append(
                    f"{r.device_id} h{harmonic}: negative excess loss retained"
                )
            points.append(GammaTjPoint(r.device_id, harmonic,
                                       float(r.a_tj or 0.0), g.value, g.sigma))

    jer_1h = [p for p in points if p.harmonic == 1 and p.a_tj > 0]
    jer_2h = [p for p in points if p.harmonic == 2 and p.a_tj > 0]
    slope = regress_internal(jer_1h)
    if slope.chi2_dof > 2.0:
        diagnostics.append(
            f"internal regression chi2/dof {slope.chi2_dof:.2f} exceeds 2"
        )
    ext = average_external(jer_2h)
    return ExtractionReport(
        baseline_1h=base_1h, baseline_2h=base_2h,
        gamma_tj_points=tuple(points), slope_1h=slope, mean_2h=ext,
        diagnostics=tuple(diagnostics),
    )
