"""Perturbation models for programmed and read conductances.

Program time: cells stuck at a conductance state (Bernoulli per cell) and
device-to-device lognormal spread. Read time: sinh-shaped I-V nonlinearity
normalized so I(V_read) = G V_read exactly, and random telegraph noise as a
two-state Markov chain over conductance multipliers {1, 1+delta}. These
functional forms are deliberate minimal models; each sits behind its own
parameter type so it can be swapped without touching callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .core import RandomStream, as_matrix
from .errors import ParameterError, RangeError
from .mapping import ConductanceWindow

STUCK_AT_G_OFF = "at_G_off"
STUCK_AT_G_ON = "at_G_on"
STUCK_AT_RANDOM = "at_random_level"

_STUCK_MODES = (STUCK_AT_G_OFF, STUCK_AT_G_ON, STUCK_AT_RANDOM)


@dataclass(frozen=True)
class StuckSpec:
    """Each cell independently sticks with probability p_stuck."""

    p_stuck: float
    mode: str = STUCK_AT_G_OFF

    def __post_init__(self):
        if not 0.0 <= self.p_stuck <= 1.0:
            raise ParameterError(f"p_stuck must be in [0, 1], got {self.p_stuck}")
        if self.mode not in _STUCK_MODES:
            raise ParameterError(
                f"unknown stuck mode {self.mode!r}; choose from {_STUCK_MODES}"
            )


@dataclass(frozen=True)
class StuckMask:
    """Where cells stuck, and at which conductance. Dimensions match the array."""

    flags: np.ndarray   # bool
    values: np.ndarray  # siemens; meaningful where flagged

    def __post_init__(self):
        if self.flags.shape != self.values.shape:
            raise ParameterError("stuck mask flags and values must share a shape")

    @property
    def count(self) -> int:
        return int(self.flags.sum())

    @classmethod
    def empty(cls, shape) -> "StuckMask":
        return cls(np.zeros(shape, dtype=bool), np.zeros(shape))


@dataclass(frozen=True)
class D2DSpec:
    """Lognormal device-to-device spread; sigma is the shape parameter."""

    sigma: float

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class IVNonlinearityParam:
    """Dimensionless curvature gamma of the sinh I-V curve; gamma = 0 is Ohmic."""

    gamma: float
    v_read: float = 0.2

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if not self.v_read > 0.0:
            raise ParameterError(f"v_read must be positive, got {self.v_read}")


@dataclass(frozen=True)
class RTNParams:
    """Telegraph noise: relative jump delta, mean dwell times in read cycles."""

    delta: float
    tau_high: float
    tau_low: float

    def __post_init__(self):
        # delta = 0 is admitted as the degenerate no-jump chain.
        if self.delta < 0.0:
            raise ParameterError(f"delta must be non-negative, got {self.delta}")
        if self.tau_high < 1.0 or self.tau_low < 1.0:
            raise ParameterError("dwell times must be >= 1 read cycle")

    @property
    def stationary_high(self) -> float:
        return self.tau_high / (self.tau_high + self.tau_low)


def apply_stuck(g, spec: StuckSpec, window: ConductanceWindow, stream: RandomStream):
    """Flag cells with probability p_stuck and freeze them per the mode.

    at_random_level draws the stuck conductance uniformly inside the window.
    Returns (perturbed matrix, StuckMask); the mask is what mitigation needs.
    """
    gm = as_matrix(g, "G")
    flags = stream.uniform(size=gm.shape) < spec.p_stuck
    if spec.mode == STUCK_AT_G_OFF:
        stuck_values = np.full(gm.shape, window.g_off)
    elif spec.mode == STUCK_AT_G_ON:
        stuck_values = np.full(gm.shape, window.g_on)
    else:
        stuck_values = stream.uniform(window.g_off, window.g_on, size=gm.shape)
    values = np.where(flags, stuck_values, 0.0)
    out = np.where(flags, stuck_values, gm)
    return out, StuckMask(flags, values)


def apply_d2d(g, spec: D2DSpec, window: ConductanceWindow, stream: RandomStream):
    """Multiply each cell by a median-1 lognormal factor, clipped to the window."""
    gm = as_matrix(g, "G")
    if (gm <= 0.0).any():
        raise RangeError("device-to-device spread requires positive conductances")
    if spec.sigma == 0.0:
        return gm.copy()
    factors = stream.lognormal_median1(spec.sigma, size=gm.shape)
    return np.clip(gm * factors, window.g_off, window.g_on)


def iv_current(g, v, param: IVNonlinearityParam):
    """Device current at voltage v for conductance g.

    I = G V_read sinh(gamma v / V_read) / sinh(gamma) for gamma > 0, G v for
    gamma = 0. Odd in v, and I(V_read) = G V_read exactly for any gamma (the
    conductance is calibrated at the read voltage). |v| above V_read is
    rejected: read voltages are bounded by design.
    """
    g = np.asarray(g, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if (np.abs(v) > param.v_read * (1.0 + 1e-12)).any():
        raise RangeError(f"|V| exceeds the read voltage bound {param.v_read}")
    if param.gamma == 0.0:
        out = g * v
    else:
        out = g * param.v_read * np.sinh(param.gamma * v / param.v_read) / np.sinh(param.gamma)
    return float(out) if out.ndim == 0 else out


def secant_conductance(g, v, param: IVNonlinearityParam):
    """I(v)/v of the sinh curve, with the analytic v -> 0 limit g*gamma/sinh(gamma)."""
    g = np.asarray(g, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if param.gamma == 0.0:
        return np.broadcast_to(g, np.broadcast_shapes(g.shape, v.shape)).copy()
    small = np.abs(v) < 1e-300
    v_safe = np.where(small, 1.0, v)
    sec = iv_current(g, np.where(small, 0.0, v_safe), param) / v_safe
    limit = g * (param.gamma / np.sinh(param.gamma))
    return np.where(small, limit, sec)


def rtn_multipliers(params: RTNParams, n_reads: int, stream: RandomStream,
                    n_cells: int = 1):
    """Conductance multipliers from a two-state telegraph chain.

    The chain lives on {1, 1+delta}; per read it leaves the high state with
    probability 1/tau_high and the low state with 1/tau_low, starting from
    the stationary distribution. Returns shape (n_reads,) for a single cell
    or (n_reads, n_cells) otherwise.
    """
    if n_reads < 1:
        raise ParameterError(f"n_reads must be >= 1, got {n_reads}")
    u_init = stream.uniform(size=n_cells)
    u_step = stream.uniform(size=(n_reads - 1, n_cells))
    states = _accel.rtn_states(
        u_init, u_step, 1.0 / params.tau_high, 1.0 / params.tau_low,
        params.stationary_high,
    )
    mult = 1.0 + params.delta * states
    return mult[:, 0] if n_cells == 1 else mult


@dataclass(frozen=True)
class PulseProgramming:
    """Enable per-cell pulse programming with the given pulse budget."""

    max_pulses: int = 100

    def __post_init__(self):
        if self.max_pulses < 1:
            raise ParameterError(f"max_pulses must be >= 1, got {self.max_pulses}")


@dataclass(frozen=True)
class NonidealityStack:
    """Ordered perturbations applied while programming and reading a crossbar.

    Program time runs quantize -> pulses -> d2d -> drift -> stuck; stuck
    cells override everything programmed before them. Read time applies the
    I-V curve and telegraph-noise multipliers. A field left at None disables
    that stage; the default stack is ideal.
    """

    quantize_bits: int | None = None
    pulses: PulseProgramming | None = None
    d2d: D2DSpec | None = None
    stuck: StuckSpec | None = None
    drift_seconds: float | None = None
    iv: IVNonlinearityParam | None = None
    rtn: RTNParams | None = None

    @classmethod
    def ideal(cls) -> "NonidealityStack":
        return cls()
