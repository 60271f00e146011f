"""Conversion between software values and physical quantities.

Inputs map to voltages (V = k_V x), weights to conductances, and currents
back to outputs (y = I / (k_V k_G)). Signed weights are encoded either as
differential pairs picked symmetrically around the window midpoint, or as a
single conductance per cell (optionally through a power-law distortion) with
a reference column whose current is subtracted digitally after readout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_matrix, as_vector
from .errors import ParameterError, RangeError, ShapeError, UnsupportedSchemeError

DIFFERENTIAL_PAIR = "differential_pair"
NAIVE = "naive"
NONLINEAR_POWER = "nonlinear_power"

_VARIANTS = (DIFFERENTIAL_PAIR, NAIVE, NONLINEAR_POWER)


@dataclass(frozen=True)
class LinearScaling:
    """Positive constants k_V (volts per input unit) and k_G (siemens per weight unit)."""

    k_v: float
    k_g: float

    def __post_init__(self):
        if not self.k_v > 0.0:
            raise ParameterError(f"k_v must be positive, got {self.k_v}")
        if not self.k_g > 0.0:
            raise ParameterError(f"k_g must be positive, got {self.k_g}")


@dataclass(frozen=True)
class ConductanceWindow:
    """Achievable conductance range [g_off, g_on], both in siemens."""

    g_off: float
    g_on: float

    def __post_init__(self):
        if not (0.0 < self.g_off < self.g_on):
            raise ParameterError(
                f"require 0 < g_off < g_on, got g_off={self.g_off}, g_on={self.g_on}"
            )

    @property
    def g_avg(self) -> float:
        return 0.5 * (self.g_off + self.g_on)

    @property
    def span(self) -> float:
        return self.g_on - self.g_off

    @property
    def on_off_ratio(self) -> float:
        return self.g_on / self.g_off

    @classmethod
    def from_ratio(cls, g_off: float, on_off_ratio: float) -> "ConductanceWindow":
        return cls(g_off, g_off * on_off_ratio)


@dataclass(frozen=True)
class MappingScheme:
    """How a weight matrix becomes conductances inside one window.

    differential_pair encodes w in G+ - G- around the window midpoint and
    needs w_max_abs; naive and nonlinear_power encode w in a single
    conductance over [w_min, w_max], the latter through a power-law
    pre-distortion of the normalized weight (a line-resistance countermeasure;
    the digital decode still assumes the linear relation).
    """

    variant: str
    window: ConductanceWindow
    scaling: LinearScaling
    w_max_abs: float | None = None
    w_min: float | None = None
    w_max: float | None = None
    power: float = 1.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ParameterError(f"unknown mapping variant {self.variant!r}")
        if self.variant == DIFFERENTIAL_PAIR:
            if self.w_max_abs is None or not self.w_max_abs > 0.0:
                raise ParameterError("differential_pair requires w_max_abs > 0")
            # Allow a few ulp of slack: the default k_g saturates the window.
            limit = self.window.span * (1.0 + 1e-12)
            if self.scaling.k_g * self.w_max_abs > limit:
                raise ParameterError(
                    "k_g * w_max_abs exceeds the conductance span "
                    f"({self.scaling.k_g * self.w_max_abs:.6g} > {self.window.span:.6g})"
                )
        else:
            if self.w_min is None or self.w_max is None or not self.w_min < self.w_max:
                raise ParameterError(f"{self.variant} requires w_min < w_max")
            if not self.power > 0.0:
                raise ParameterError(f"power must be positive, got {self.power}")

    @classmethod
    def differential_pair(cls, window, w_max_abs, k_v, k_g=None) -> "MappingScheme":
        """Differential pairs; k_g defaults to span/w_max_abs (full window used)."""
        if k_g is None:
            k_g = window.span / w_max_abs
        return cls(DIFFERENTIAL_PAIR, window, LinearScaling(k_v, k_g), w_max_abs=w_max_abs)

    @classmethod
    def naive(cls, window, w_min, w_max, k_v) -> "MappingScheme":
        k_g = window.span / (w_max - w_min)
        return cls(NAIVE, window, LinearScaling(k_v, k_g), w_min=w_min, w_max=w_max)

    @classmethod
    def nonlinear_power(cls, window, w_min, w_max, power, k_v) -> "MappingScheme":
        k_g = window.span / (w_max - w_min)
        return cls(
            NONLINEAR_POWER,
            window,
            LinearScaling(k_v, k_g),
            w_min=w_min,
            w_max=w_max,
            power=power,
        )


def encode_inputs(x, scaling: LinearScaling) -> np.ndarray:
    """V = k_V x elementwise; negative inputs give negative (bipolar) voltages."""
    return scaling.k_v * as_vector(x, "x")


def weights_to_diff_pair(w, scheme: MappingScheme):
    """Map weights to (G+, G-) = G_avg +/- k_G w / 2.

    The smaller pair member is derived as 2 G_avg - larger, which keeps the
    pair sum at exactly 2 G_avg in floating point; a final clip trims
    ulp-level spill at the window edges.
    """
    if scheme.variant != DIFFERENTIAL_PAIR:
        raise UnsupportedSchemeError(
            f"weights_to_diff_pair requires the differential_pair scheme, got {scheme.variant}"
        )
    wm = as_matrix(w, "W")
    over = np.abs(wm) > scheme.w_max_abs
    if over.any():
        i, j = np.unravel_index(int(np.argmax(over)), wm.shape)
        raise RangeError(
            f"weight at ({i}, {j}) = {wm[i, j]:.6g} exceeds |w| <= {scheme.w_max_abs:.6g}"
        )
    window = scheme.window
    g_avg = window.g_avg
    half = 0.5 * scheme.scaling.k_g * np.abs(wm)
    hi = g_avg + half              # >= g_avg, so 2*g_avg - hi is exact (Sterbenz)
    lo = 2.0 * g_avg - hi
    g_plus = np.where(wm >= 0.0, hi, lo)
    g_minus = np.where(wm >= 0.0, lo, hi)
    g_plus = np.clip(g_plus, window.g_off, window.g_on)
    g_minus = np.clip(g_minus, window.g_off, window.g_on)
    return g_plus, g_minus


def weights_to_naive(w, scheme: MappingScheme):
    """Map weights to single conductances plus the reference level.

    G = g_off + span * u^p with u the weight normalized to [0, 1]; p = 1 is
    the plain linear map. The returned g_ref is the conductance encoding
    w = 0, realized physically as one reference column whose current is
    subtracted after readout.
    """
    if scheme.variant not in (NAIVE, NONLINEAR_POWER):
        raise UnsupportedSchemeError(
            f"weights_to_naive requires naive or nonlinear_power, got {scheme.variant}"
        )
    wm = as_matrix(w, "W")
    lo, hi = scheme.w_min, scheme.w_max
    out_of_range = (wm < lo) | (wm > hi)
    if out_of_range.any():
        i, j = np.unravel_index(int(np.argmax(out_of_range)), wm.shape)
        raise RangeError(
            f"weight at ({i}, {j}) = {wm[i, j]:.6g} outside [{lo:.6g}, {hi:.6g}]"
        )
    if not lo <= 0.0 <= hi:
        raise RangeError(
            f"weight range [{lo:.6g}, {hi:.6g}] must contain 0 for the reference column"
        )
    window = scheme.window
    u = (wm - lo) / (hi - lo)
    u0 = (0.0 - lo) / (hi - lo)
    p = scheme.power
    if p != 1.0:
        u = np.power(u, p)
        u0 = u0**p
    g = window.g_off + window.span * u
    g_ref = window.g_off + window.span * u0
    return np.clip(g, window.g_off, window.g_on), float(g_ref)


def decode_outputs(i_plus, i_minus, scaling: LinearScaling) -> np.ndarray:
    """y = (I+ - I-) / (k_V k_G)."""
    ip = as_vector(i_plus, "I_plus")
    im = as_vector(i_minus, "I_minus")
    if ip.shape != im.shape:
        raise ShapeError(
            f"current vectors differ in length: {ip.shape[0]} vs {im.shape[0]}"
        )
    return (ip - im) / (scaling.k_v * scaling.k_g)
