"""Memory-technology presets and device-level behaviour.

Presets carry the comparative parameters of the candidate technologies
(on/off ratio, multilevel capability, programming linearity, drift) plus
qualitative metadata for reporting. Ranged parameters use the geometric
midpoint and retain both bounds. Device behaviour covered here: conductance
quantization to 2^bits levels, pulse programming with saturating or constant
steps, and power-law conductance drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import ParameterError, PresetError, RangeError
from .mapping import ConductanceWindow

# Common anchor so cross-preset comparisons isolate the on/off ratio.
DEFAULT_G_OFF = 10e-6  # siemens

# Placeholder drift exponents; the comparison table only rates drift
# qualitatively (strong for PCM, weak for RRAM, none elsewhere).
DRIFT_NU_PCM = 0.1
DRIFT_NU_RRAM = 0.005

DRIFT_T0 = 1.0  # seconds, reference time


@dataclass(frozen=True)
class DeviceModel:
    """One memory technology as seen by the simulator."""

    name: str
    on_off_ratio: float
    g_off: float = DEFAULT_G_OFF
    bits: int = 1
    programming_alpha: float = 0.1
    linear_programming: bool = False
    programmable: bool = True  # False: no analogue pulse programming (abrupt switching)
    drift_nu: float = 0.0
    suitable_for_inference: bool = True
    on_off_ratio_range: tuple[float, float] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.on_off_ratio > 1.0:
            raise ParameterError(f"on/off ratio must exceed 1, got {self.on_off_ratio}")
        if not self.g_off > 0.0:
            raise ParameterError(f"g_off must be positive, got {self.g_off}")
        if self.bits < 1:
            raise ParameterError(f"bits must be >= 1, got {self.bits}")
        if not 0.0 < self.programming_alpha <= 1.0:
            raise ParameterError(
                f"programming_alpha must be in (0, 1], got {self.programming_alpha}"
            )
        if self.drift_nu < 0.0:
            raise ParameterError(f"drift_nu must be >= 0, got {self.drift_nu}")

    @property
    def g_on(self) -> float:
        return self.g_off * self.on_off_ratio

    @property
    def window(self) -> ConductanceWindow:
        return ConductanceWindow(self.g_off, self.g_on)

    def replace(self, **kwargs) -> "DeviceModel":
        from dataclasses import replace as _replace

        return _replace(self, **kwargs)


def _geomid(lo: float, hi: float) -> float:
    return float(np.sqrt(lo * hi))


def _model(name, ratio, bits, linearity, drift_nu, inference, metadata):
    if isinstance(ratio, tuple):
        value, bounds = _geomid(*ratio), ratio
    else:
        value, bounds = float(ratio), None
    return DeviceModel(
        name=name,
        on_off_ratio=value,
        on_off_ratio_range=bounds,
        bits=bits,
        programming_alpha=0.1,
        linear_programming=(linearity == "High"),
        programmable=(linearity != "None"),
        drift_nu=drift_nu,
        suitable_for_inference=(inference in ("Yes", "Moderate")),
        metadata={"linearity": linearity, "inference": inference, **metadata},
    )


_PRESETS = {
    m.name: m
    for m in [
        _model("NOR-flash", 1e4, 2, "Low", 0.0, "Yes",
               {"write_voltage_v": "10", "write_time_ns": "1e3-1e4",
                "read_time_ns": "~50", "write_energy_fj_bit": "~1e5",
                "standby_power": "Low", "integration_density": "High",
                "retention": "Long", "drift": "No", "endurance": "1e5", "training": "No"}),
        _model("NAND-flash", 1e4, 4, "Low", 0.0, "Yes",
               {"write_voltage_v": "10", "write_time_ns": "1e5-1e6",
                "read_time_ns": "~1e4", "write_energy_fj_bit": "10",
                "standby_power": "Low", "integration_density": "Very high",
                "retention": "Long", "drift": "No", "endurance": "1e4", "training": "No"}),
        _model("RRAM", (10.0, 1e2), 2, "Low", DRIFT_NU_RRAM, "Moderate",
               {"write_voltage_v": "<3", "write_time_ns": "<10",
                "read_time_ns": "<10", "write_energy_fj_bit": "1e2-1e4",
                "standby_power": "Low", "integration_density": "High",
                "retention": "Medium", "drift": "Weak", "endurance": "1e5-1e8", "training": "No"}),
        _model("PCM", (1e2, 1e4), 2, "Low", DRIFT_NU_PCM, "Yes",
               {"write_voltage_v": "<3", "write_time_ns": "~50",
                "read_time_ns": "<10", "write_energy_fj_bit": "1e4",
                "standby_power": "Low", "integration_density": "High",
                "retention": "Long", "drift": "Yes", "endurance": "1e6-1e9", "training": "No"}),
        _model("STT-MRAM", (1.5, 2.0), 1, "None", 0.0, "No",
               {"write_voltage_v": "<1.5", "write_time_ns": "<10",
                "read_time_ns": "<10", "write_energy_fj_bit": "~1e2",
                "standby_power": "Low", "integration_density": "High",
                "retention": "Medium", "drift": "No", "endurance": "1e15", "training": "No"}),
        _model("FeRAM", (1e2, 1e3), 1, "None", 0.0, "No",
               {"write_voltage_v": "<3", "write_time_ns": "~30",
                "read_time_ns": "<10", "write_energy_fj_bit": "~1e2",
                "standby_power": "Low", "integration_density": "Low",
                "retention": "Long", "drift": "No", "endurance": "1e10", "training": "No"}),
        _model("FeFET", (5.0, 50.0), 5, "Low", 0.0, "Yes",
               {"write_voltage_v": "<5", "write_time_ns": "<10",
                "read_time_ns": "<10", "write_energy_fj_bit": "<1",
                "standby_power": "Low", "integration_density": "High",
                "retention": "Long", "drift": "No", "endurance": ">1e5", "training": "Moderate"}),
        _model("SOT-MRAM", (1.5, 2.0), 1, "None", 0.0, "No",
               {"write_voltage_v": "<1.5", "write_time_ns": "<10",
                "read_time_ns": "<10", "write_energy_fj_bit": "<1e2",
                "standby_power": "Low", "integration_density": "High",
                "retention": "Medium", "drift": "No", "endurance": ">1e15", "training": "No"}),
        _model("Li-ion", (40.0, 1e3), 10, "High", 0.0, "Yes",
               {"write_voltage_v": "<1", "write_time_ns": "<10",
                "read_time_ns": "<10", "write_energy_fj_bit": "~1e2",
                "standby_power": "Low", "integration_density": "Low",
                "retention": "n/a", "drift": "No", "endurance": ">1e5", "training": "Yes"}),
    ]
}

PRESET_NAMES = tuple(_PRESETS)
_PRESET_LOOKUP = {name.lower(): name for name in _PRESETS}


def preset(name: str) -> DeviceModel:
    """Look up a technology preset by name (case-insensitive)."""
    key = _PRESET_LOOKUP.get(str(name).lower())
    if key is None:
        raise PresetError(
            f"unknown device preset {name!r}; valid names: {', '.join(PRESET_NAMES)}"
        )
    return _PRESETS[key]


def preset_table() -> list[dict]:
    """Machine-readable record per technology, for the CLI report."""
    rows = []
    for m in _PRESETS.values():
        rec = {
            "name": m.name,
            "on_off_ratio": m.on_off_ratio,
            "on_off_ratio_low": m.on_off_ratio_range[0] if m.on_off_ratio_range else "",
            "on_off_ratio_high": m.on_off_ratio_range[1] if m.on_off_ratio_range else "",
            "bits": m.bits,
            "g_off_siemens": m.g_off,
            "g_on_siemens": m.g_on,
            "programming_alpha": m.programming_alpha,
            "linear_programming": m.linear_programming,
            "programmable": m.programmable,
            "drift_nu": m.drift_nu,
            "suitable_for_inference": m.suitable_for_inference,
        }
        rec.update(m.metadata)
        rows.append(rec)
    return rows


def quantize(g, window: ConductanceWindow, bits: int) -> np.ndarray:
    """Snap conductances to the nearest of 2^bits uniform levels in the window.

    Ties round toward g_on. bits >= 52 is treated as the identity: the level
    spacing would sit below float64 resolution.
    """
    if bits < 1:
        raise ParameterError(f"bits must be >= 1, got {bits}")
    g = np.asarray(g, dtype=np.float64)
    if (g < window.g_off).any() or (g > window.g_on).any():
        raise RangeError("conductances outside the window cannot be quantized")
    if bits >= 52:
        return g.copy()
    levels = (1 << bits) - 1
    step = window.span / levels
    idx = np.floor((g - window.g_off) / step + 0.5)  # half-way cases go up
    idx = np.clip(idx, 0, levels)
    return np.clip(window.g_off + idx * step, window.g_off, window.g_on)


def program_pulses(g_start, g_target, model: DeviceModel, max_pulses: int,
                   window: ConductanceWindow | None = None):
    """Drive conductances toward targets with programming pulses.

    Saturating devices step by alpha*(g_on - g) upward and alpha*(g - g_off)
    downward; linear devices use the constant step alpha*(g_on - g_off).
    Stops per cell when within half the next step of the target or when the
    pulse budget is spent. Returns (g_final, pulses_used) with input shape.
    """
    if not model.programmable:
        raise ParameterError(
            f"{model.name} switches abruptly and cannot be pulse-programmed"
        )
    if max_pulses < 0:
        raise ParameterError("max_pulses must be >= 0")
    win = window if window is not None else model.window
    start = np.asarray(g_start, dtype=np.float64)
    target = np.asarray(g_target, dtype=np.float64)
    scalar = start.ndim == 0 and target.ndim == 0
    start, target = np.broadcast_arrays(start, target)
    for name, arr in (("start", start), ("target", target)):
        if (arr < win.g_off).any() or (arr > win.g_on).any():
            raise RangeError(f"programming {name} conductance outside the window")
    g_final, pulses = _accel.program_pulses_batch(
        np.ascontiguousarray(start.ravel()),
        np.ascontiguousarray(target.ravel()),
        win.g_off,
        win.g_on,
        model.programming_alpha,
        model.linear_programming,
        int(max_pulses),
    )
    g_final = g_final.reshape(start.shape)
    pulses = pulses.reshape(start.shape)
    if scalar:
        return float(g_final), int(pulses)
    return g_final, pulses


def drift(g, t: float, model: DeviceModel, t0: float = DRIFT_T0):
    """Power-law conductance decay g (t/t0)^-nu, floored at g_off."""
    if t < t0:
        raise ParameterError(f"drift time {t} below the reference time {t0}")
    g = np.asarray(g, dtype=np.float64)
    decayed = g * (t / t0) ** (-model.drift_nu)
    out = np.maximum(decayed, model.g_off)
    return float(out) if out.ndim == 0 else out
