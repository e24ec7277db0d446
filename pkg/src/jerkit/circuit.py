"""Two-port circuit model of a junction-embedded half-wave resonator.

The device is an open-ended transmission-line resonator with a lumped
junction network at its midpoint, side-coupled to a matched feedline
through a series coupling branch (notch / hanger geometry).  Everything
here is a pure function of frequency and of immutable circuit
descriptions, vectorized over frequency arrays.

Conventions
-----------
ABCD matrices follow [V1, I1] = M @ [V2, I2] with port 1 toward the
feed and port 2 toward the open end.  Frequencies in Hz, impedances in
ohm, admittances in S, lengths in m, attenuation in Np/m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import CircuitError

__all__ = [
    "LineSpec",
    "JunctionArray",
    "JerCircuit",
    "series_element",
    "shunt_element",
    "line_element",
    "abcd_cascade",
    "resonator_abcd",
    "branch_impedance",
    "s21",
]


# ---------------------------------------------------------------------------
# element builders


def series_element(z):
    """ABCD matrix of a series impedance z (scalar or array)."""
    z = np.asarray(z, dtype=complex)
    m = np.zeros(z.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = 1.0
    m[..., 0, 1] = z
    m[..., 1, 1] = 1.0
    return m


def shunt_element(y):
    """ABCD matrix of a shunt admittance y to ground (scalar or array)."""
    y = np.asarray(y, dtype=complex)
    m = np.zeros(y.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = 1.0
    m[..., 1, 0] = y
    m[..., 1, 1] = 1.0
    return m


def line_element(z0, v_ph, length, f, alpha=0.0):
    """ABCD matrix of a uniform line section.

    gamma = alpha + j * 2*pi*f / v_ph, so
    M = [[cosh(gamma*d), z0*sinh(gamma*d)], [sinh(gamma*d)/z0, cosh(gamma*d)]].
    """
    f = np.asarray(f, dtype=float)
    gd = (alpha + 2j * np.pi * f / v_ph) * length
    ch, sh = np.cosh(gd), np.sinh(gd)
    m = np.empty(f.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = ch
    m[..., 0, 1] = z0 * sh
    m[..., 1, 0] = sh / z0
    m[..., 1, 1] = ch
    return m


def abcd_cascade(elements):
    """Multiply two-port ABCD matrices in cascade order.

    Parameters
    ----------
    elements : sequence of arrays broadcastable to (..., 2, 2)
        Ordered from the port-1 side to the port-2 side.  An empty
        sequence yields the identity.

    Raises
    ------
    CircuitError
        If any element contains a non-finite entry; the message names
        the offending element index.
    """
    out = None
    for i, elem in enumerate(elements):
        m = np.asarray(elem, dtype=complex)
        if m.shape[-2:] != (2, 2):
            raise CircuitError(f"element {i} is not a 2x2 two-port matrix")
        if not np.all(np.isfinite(m)):
            raise CircuitError(f"element {i} contains non-finite entries")
        out = m if out is None else out @ m
    if out is None:
        return np.eye(2, dtype=complex)
    return out


# ---------------------------------------------------------------------------
# device description


@dataclass(frozen=True)
class LineSpec:
    """Distributed parameters of one resonator half.

    z0 : characteristic impedance (ohm)
    v_ph : phase velocity (m/s)
    length : physical length (m)
    alpha : attenuation constant (Np/m)
    """

    z0: float
    v_ph: float
    length: float
    alpha: float = 0.0

    def __post_init__(self):
        if not (self.z0 > 0 and self.v_ph > 0 and self.length > 0):
            raise CircuitError("line requires z0 > 0, v_ph > 0, length > 0")
        if self.alpha < 0:
            raise CircuitError("line attenuation must be >= 0")
        if not math.isfinite(self.half_wave_freq):
            raise CircuitError("bare half-wave frequency is not finite")

    @property
    def l_per_m(self) -> float:
        """Inductance per unit length, z0 / v_ph (H/m)."""
        return self.z0 / self.v_ph

    @property
    def c_per_m(self) -> float:
        """Capacitance per unit length, 1 / (z0 v_ph) (F/m)."""
        return 1.0 / (self.z0 * self.v_ph)

    @property
    def half_wave_freq(self) -> float:
        """Fundamental of a bare open-open line of this length (Hz)."""
        return self.v_ph / (2.0 * self.length)


@dataclass(frozen=True)
class JunctionArray:
    """Lumped midpoint network standing in for the series junction stack.

    count : number of junctions (0 encodes a dummy stripe), even when > 0
    area_each : per-junction area (um^2)
    l_total : total linear inductance (H)
    r_series : series resistance, the current-driven loss channel (ohm)
    g_shunt : shunt conductance to ground, the field-driven channel (S)
    c_shunt : shunt capacitance to ground (F)
    """

    count: int = 0
    area_each: float = 0.0
    l_total: float = 0.0
    r_series: float = 0.0
    g_shunt: float = 0.0
    c_shunt: float = 0.0

    def __post_init__(self):
        if self.count < 0 or self.count != int(self.count):
            raise CircuitError("junction count must be a non-negative integer")
        if self.count > 0 and self.count % 2 != 0:
            raise CircuitError("junction count must be even when non-zero")
        if self.area_each < 0:
            raise CircuitError("junction area must be >= 0")
        if self.l_total < 0:
            raise CircuitError("junction inductance must be >= 0")
        if self.r_series < 0 or self.g_shunt < 0 or self.c_shunt < 0:
            raise CircuitError("junction loss/capacitance parameters must be >= 0")

    @property
    def a_total(self) -> float:
        """Total junction area, count * area_each (um^2)."""
        return self.count * self.area_each

    @property
    def is_dummy(self) -> bool:
        return self.a_total == 0.0


@dataclass(frozen=True)
class JerCircuit:
    """Full device: feedline, coupler, two line halves, junction network.

    feed_z0 : feedline characteristic impedance (ohm)
    c_couple : series coupling capacitance (F); 0 decouples the branch
    l_couple : parasitic series inductance of the coupling branch (H)
    left, right : the two resonator halves (equal lengths)
    junction : midpoint network
    temperature : mixing-chamber temperature (K)
    """

    feed_z0: float
    c_couple: float
    left: LineSpec
    right: LineSpec
    junction: JunctionArray
    temperature: float = 0.015
    l_couple: float = 0.0

    def __post_init__(self):
        if self.feed_z0 <= 0:
            raise CircuitError("feedline impedance must be > 0")
        if self.c_couple < 0 or self.l_couple < 0:
            raise CircuitError("coupler parameters must be >= 0")
        if self.temperature <= 0:
            raise CircuitError("temperature must be > 0")
        rel = abs(self.left.length - self.right.length) / self.left.length
        if rel > 1e-9:
            raise CircuitError("junction must sit at the midpoint (equal half lengths)")

    @property
    def total_length(self) -> float:
        return self.left.length + self.right.length

    @property
    def is_coupled(self) -> bool:
        return self.c_couple > 0.0


# ---------------------------------------------------------------------------
# chain evaluation

_OPEN_SENTINEL = complex(np.inf, 0.0)


def _mat_mul(a, b):
    """Product of two (A, B, C, D) tuples of frequency arrays."""
    a11, a12, a21, a22 = a
    b11, b12, b21, b22 = b
    return (
        a11 * b11 + a12 * b21,
        a11 * b12 + a12 * b22,
        a21 * b11 + a22 * b21,
        a21 * b12 + a22 * b22,
    )


def _line_abcd(spec: LineSpec, f):
    gd = (spec.alpha + 2j * np.pi * f / spec.v_ph) * spec.length
    ch, sh = np.cosh(gd), np.sinh(gd)
    return ch, spec.z0 * sh, sh / spec.z0, ch


def _junction_abcd(j: JunctionArray, f):
    """Half the shunt admittance on each side of the series element.

    The symmetric split keeps the even mode's midpoint current node.
    """
    w = 2.0 * np.pi * f
    y_half = 0.5 * (j.g_shunt + 1j * w * j.c_shunt)
    z_j = j.r_series + 1j * w * j.l_total
    one = np.ones_like(y_half)
    shunt = (one, np.zeros_like(y_half), y_half, one)
    series = (one, z_j * one, np.zeros_like(y_half), one)
    return _mat_mul(_mat_mul(shunt, series), shunt)


def resonator_abcd(circuit: JerCircuit, f):
    """(A, B, C, D) of the bare resonator chain, coupler excluded.

    Open-open resonances of the decoupled device are the zeros of C.
    """
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise CircuitError("frequencies must be finite and > 0")
    m = _line_abcd(circuit.left, f)
    m = _mat_mul(m, _junction_abcd(circuit.junction, f))
    m = _mat_mul(m, _line_abcd(circuit.right, f))
    return m


def branch_impedance(circuit: JerCircuit, f):
    """Input impedance of the coupled branch seen from the feed node (ohm).

    The chain is series coupler, left line, junction network, right
    line, open termination, evaluated as A/C of the cascade.  A zero C
    entry (exact current node at the feed) is reported as an infinite
    impedance sentinel rather than a crash; a fully decoupled branch
    (c_couple = 0) is open for all frequencies.
    """
    f = np.asarray(f, dtype=float)
    scalar = f.ndim == 0
    f = np.atleast_1d(f)
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise CircuitError("frequencies must be finite and > 0")
    if not circuit.is_coupled:
        z = np.full(f.shape, _OPEN_SENTINEL)
        return z[0] if scalar else z

    w = 2.0 * np.pi * f
    z_c = 1.0 / (1j * w * circuit.c_couple) + 1j * w * circuit.l_couple
    one = np.ones_like(z_c)
    zero = np.zeros_like(z_c)
    m = _mat_mul((one, z_c, zero, one), resonator_abcd(circuit, f))
    a, c = m[0], m[2]
    z = np.full(f.shape, _OPEN_SENTINEL)
    ok = c != 0
    z[ok] = a[ok] / c[ok]
    return z[0] if scalar else z


def s21(circuit: JerCircuit, f):
    """Complex transmission past the shunt branch on a matched feedline.

    S21 = 2 Zb / (2 Zb + feed_z0).  Passive inputs give |S21| <= 1 and
    S21 -> 1 far from resonance; an open branch is exactly 1 and a
    shorted branch exactly 0.
    """
    f = np.asarray(f, dtype=float)
    scalar = f.ndim == 0
    zb = np.atleast_1d(branch_impedance(circuit, f))
    out = np.empty(zb.shape, dtype=complex)
    inf_mask = ~np.isfinite(zb)
    zero_mask = zb == 0
    rest = ~(inf_mask | zero_mask)
    out[inf_mask] = 1.0
    out[zero_mask] = 0.0
    out[rest] = 1.0 / (1.0 + circuit.feed_z0 / (2.0 * zb[rest]))
    return out[0] if scalar else out
