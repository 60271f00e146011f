"""Programmable crossbar: mapping, device model, nonidealities, interconnect.

Programming runs the weight matrix through the configured pipeline
(map -> quantize -> pulse-program -> device-to-device spread -> drift ->
stuck cells) with every random draw taken from an addressable substream, so
a (config, seed) pair always produces the same array. A programmed Crossbar
is immutable; reads never mutate it and concurrent reads take their own
substreams keyed by an explicit call index.

Reads support amplitude encoding (bipolar voltages, one phase) and
pulse-width encoding (two unipolar phases at fixed amplitude whose charges
are subtracted; at zero wire resistance the accumulated charge is
independent of the I-V curve shape). Under line resistance with a nonlinear
device curve, each device is replaced by its secant conductance at the cell
voltage of the previous solver iterate until the true-device KCL residual
meets the solver bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RandomStream, as_matrix
from .devices import DeviceModel, drift, program_pulses, quantize
from .errors import ParameterError, RangeError, ShapeError, SolverError
from .interconnect import CrossbarSystem, LineResistanceParams, residual_bound
from .mapping import (
    DIFFERENTIAL_PAIR,
    MappingScheme,
    weights_to_diff_pair,
    weights_to_naive,
)
from .nonidealities import (
    NonidealityStack,
    StuckMask,
    apply_d2d,
    apply_stuck,
    iv_current,
    rtn_multipliers,
    secant_conductance,
)

ENC_AMPLITUDE = "amplitude"
ENC_PULSE_WIDTH = "pulse_width"

_SECANT_MAX_ITER = 50


@dataclass(frozen=True)
class ReadConfig:
    """How a vector-matrix product is read out.

    n_avg repetitions are averaged (temporal averaging against stochastic
    read noise). pulse_slots quantizes pulse-width durations to that many
    clocked slots; None keeps durations continuous.
    """

    v_read: float = 0.2
    n_avg: int = 1
    encoding: str = ENC_AMPLITUDE
    pulse_slots: int | None = 256

    def __post_init__(self):
        if not self.v_read > 0.0:
            raise ParameterError(f"v_read must be positive, got {self.v_read}")
        if self.n_avg < 1:
            raise ParameterError(f"n_avg must be >= 1, got {self.n_avg}")
        if self.encoding not in (ENC_AMPLITUDE, ENC_PULSE_WIDTH):
            raise ParameterError(f"unknown input encoding {self.encoding!r}")
        if self.pulse_slots is not None and self.pulse_slots < 1:
            raise ParameterError("pulse_slots must be >= 1 or None")


@dataclass(frozen=True)
class CrossbarConfig:
    """Everything needed to program one crossbar reproducibly."""

    scheme: MappingScheme
    device: DeviceModel
    stack: NonidealityStack
    interconnect: LineResistanceParams
    seed: int
    stream_id: int | str = "crossbar"


@dataclass(frozen=True)
class Crossbar:
    """A programmed array; create a new value to re-program.

    For the differential scheme g_plus/g_minus hold the pair matrices; for
    the single-conductance schemes g_plus holds the data columns with the
    reference column appended last and g_minus is None.
    """

    g_plus: np.ndarray
    g_minus: np.ndarray | None
    mask_plus: StuckMask
    mask_minus: StuckMask | None
    config: CrossbarConfig
    rows: int
    cols: int

    @property
    def differential(self) -> bool:
        return self.config.scheme.variant == DIFFERENTIAL_PAIR


def _program_side(g_target, side, config: CrossbarConfig, stream: RandomStream):
    stack = config.stack
    window = config.scheme.window
    g = g_target
    if stack.quantize_bits is not None:
        g = quantize(g, window, stack.quantize_bits)
    if stack.pulses is not None:
        # Cells start from the erased state at g_off and are pulsed upward.
        start = np.full(g.shape, window.g_off)
        g, _ = program_pulses(start, g, config.device, stack.pulses.max_pulses, window)
    if stack.d2d is not None:
        g = apply_d2d(g, stack.d2d, window, stream.substream(side, "d2d"))
    if stack.drift_seconds is not None:
        g = np.maximum(drift(g, stack.drift_seconds, config.device), window.g_off)
    if stack.stuck is not None:
        g, mask = apply_stuck(g, stack.stuck, window, stream.substream(side, "stuck"))
    else:
        mask = StuckMask.empty(g.shape)
    return g, mask


def _freeze(arr):
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


def program(w, config: CrossbarConfig) -> Crossbar:
    """Map a weight matrix to conductances and run the programming pipeline."""
    wm = as_matrix(w, "W")
    stream = RandomStream(config.seed, config.stream_id)
    if config.scheme.variant == DIFFERENTIAL_PAIR:
        gp_target, gm_target = weights_to_diff_pair(wm, config.scheme)
        g_plus, mask_plus = _program_side(gp_target, "plus", config, stream)
        g_minus, mask_minus = _program_side(gm_target, "minus", config, stream)
    else:
        g_data, g_ref = weights_to_naive(wm, config.scheme)
        full = np.concatenate([g_data, np.full((wm.shape[0], 1), g_ref)], axis=1)
        g_plus, mask_plus = _program_side(full, "single", config, stream)
        g_minus, mask_minus = None, None
    g_plus = _freeze(g_plus)
    mask_plus = StuckMask(_freeze(mask_plus.flags), _freeze(mask_plus.values))
    if g_minus is not None:
        g_minus = _freeze(g_minus)
        mask_minus = StuckMask(_freeze(mask_minus.flags), _freeze(mask_minus.values))
    return Crossbar(
        g_plus=g_plus,
        g_minus=g_minus,
        mask_plus=mask_plus,
        mask_minus=mask_minus,
        config=config,
        rows=wm.shape[0],
        cols=wm.shape[1],
    )


def read_conductances(xbar: Crossbar):
    """Copies of the programmed pair matrices and their stuck masks."""
    g_plus = xbar.g_plus.copy()
    g_minus = None if xbar.g_minus is None else xbar.g_minus.copy()
    masks = {
        "plus": StuckMask(xbar.mask_plus.flags.copy(), xbar.mask_plus.values.copy()),
        "minus": None
        if xbar.mask_minus is None
        else StuckMask(xbar.mask_minus.flags.copy(), xbar.mask_minus.values.copy()),
    }
    return g_plus, g_minus, masks


def with_conductances(xbar: Crossbar, g_plus, g_minus=None) -> Crossbar:
    """New Crossbar value with replaced conductances (masks and config kept)."""
    return Crossbar(
        g_plus=_freeze(np.array(g_plus, dtype=np.float64)),
        g_minus=None if g_minus is None else _freeze(np.array(g_minus, dtype=np.float64)),
        mask_plus=xbar.mask_plus,
        mask_minus=xbar.mask_minus,
        config=xbar.config,
        rows=xbar.rows,
        cols=xbar.cols,
    )


# -- read path --------------------------------------------------------------


def _nonlinear_currents(g_cal, v_vec, params, iv):
    """Self-consistent solve: devices follow the sinh curve under IR drop.

    Each device is replaced by the secant conductance I(V_cell)/V_cell from
    the previous iterate, starting Ohmic, until the KCL residual evaluated
    with the true device currents meets the solver bound.
    """
    v_vec = np.asarray(v_vec, dtype=np.float64)
    system = CrossbarSystem(g_cal, params)
    residual = np.inf
    for _ in range(_SECANT_MAX_ITER):
        result = system.solve(v_vec)
        v_cell = np.clip(
            result.word_potentials - result.bit_potentials, -iv.v_read, iv.v_read
        )
        g_new = secant_conductance(g_cal, v_cell, iv)
        # The secants recomputed at the solved potentials reproduce the sinh
        # currents exactly, so this linear residual is the true-device one.
        check = CrossbarSystem(g_new, params, factorize=False)
        residual = check.kcl_residual(result.word_potentials, result.bit_potentials, v_vec)
        if residual <= residual_bound(result.i_out):
            # Termination currents are wire-based, so the solved potentials
            # already give the output at this residual.
            return result.i_out
        system = check
    raise SolverError(
        f"secant iteration did not reach the residual bound after {_SECANT_MAX_ITER} "
        f"iterations (last residual {residual:.3e} A)"
    )


def _amplitude_currents(g_eff, v_cols, params, iv):
    """Currents (k, cols) for bipolar amplitude reads at voltages v_cols (m, k)."""
    gamma = 0.0 if iv is None else iv.gamma
    if params.ideal:
        if gamma == 0.0:
            return v_cols.T @ g_eff
        # (m, p, k) device currents summed along the bit lines.
        device_i = iv_current(g_eff[:, :, None], v_cols[:, None, :], iv)
        return np.einsum("mpk->kp", device_i)
    if gamma == 0.0:
        system = CrossbarSystem(g_eff, params)
        i_out, _, _, _ = system.solve_many(v_cols)
        return i_out
    return np.stack(
        [_nonlinear_currents(g_eff, v_cols[:, s], params, iv) for s in range(v_cols.shape[1])]
    )


def _pulse_width_currents(g_eff, v_cols, read, params, iv):
    """Charge-per-window currents for pulse-width encoded inputs.

    Inputs become pulse durations |V|/V_read at fixed amplitude V_read; signs
    are handled as two unipolar phases whose charges are subtracted. With
    ideal wires every active device sits at the same operating point, so the
    curve shape cannot mix with the inputs (and drops out entirely when the
    drive matches the calibration voltage); under line resistance the window
    is integrated segment by segment as shorter pulses switch off.
    """
    durations = np.abs(v_cols) / read.v_read
    if read.pulse_slots is not None:
        durations = np.round(durations * read.pulse_slots) / read.pulse_slots
    signed = durations * np.sign(v_cols)
    if params.ideal:
        # Every active device sits at the same drive amplitude, so its
        # current is G times a shared per-volt factor; at the calibration
        # voltage that factor is exactly V_read for any gamma.
        if iv is None or iv.gamma == 0.0:
            unit = read.v_read
        else:
            unit = float(iv_current(1.0, read.v_read, iv))
        return (signed * unit).T @ g_eff
    k = v_cols.shape[1]
    out = np.zeros((k, g_eff.shape[1]))
    nonlinear = iv is not None and iv.gamma > 0.0
    system = None if nonlinear else CrossbarSystem(g_eff, params)
    for s in range(k):
        for sign in (1.0, -1.0):
            d_phase = np.where(np.sign(v_cols[:, s]) == sign, durations[:, s], 0.0)
            boundaries = np.unique(d_phase[d_phase > 0.0])
            if boundaries.size == 0:
                continue
            weights = np.diff(boundaries, prepend=0.0)
            if nonlinear:
                for t, dt in zip(boundaries, weights):
                    v_seg = np.where(d_phase >= t, read.v_read, 0.0)
                    out[s] += sign * dt * _nonlinear_currents(g_eff, v_seg, params, iv)
            else:
                v_segs = np.where(
                    d_phase[:, None] >= boundaries[None, :], read.v_read, 0.0
                )
                i_segs, _, _, _ = system.solve_many(v_segs)
                out[s] += sign * (weights @ i_segs)
    return out


def _side_currents(g_eff, v_cols, read, params, iv):
    if read.encoding == ENC_AMPLITUDE:
        return _amplitude_currents(g_eff, v_cols, params, iv)
    return _pulse_width_currents(g_eff, v_cols, read, params, iv)


def vmm_batch(xbar: Crossbar, x_rows, read: ReadConfig, call_index: int = 0) -> np.ndarray:
    """Crossbar vector-matrix products for a batch of input vectors (rows).

    Sample s of call c draws read noise from the substream addressed by
    (c, s); identical (crossbar, inputs, read, call_index) always reproduce
    the same outputs.
    """
    x = as_matrix(x_rows, "x batch")
    if x.shape[1] != xbar.rows:
        raise ShapeError(f"input length {x.shape[1]} does not match {xbar.rows} rows")
    scheme = xbar.config.scheme
    stack = xbar.config.stack
    params = xbar.config.interconnect
    iv = stack.iv
    if iv is not None and read.v_read > iv.v_read * (1.0 + 1e-12):
        raise ParameterError(
            f"read voltage {read.v_read} exceeds the device calibration voltage {iv.v_read}"
        )
    v_cols = (scheme.scaling.k_v * x).T  # (m, k)
    if np.max(np.abs(v_cols), initial=0.0) > read.v_read * (1.0 + 1e-12):
        worst = float(np.max(np.abs(v_cols)))
        raise RangeError(
            f"encoded input reaches {worst:.6g} V, beyond the read voltage {read.v_read} V"
        )

    sides = [("plus", xbar.g_plus)]
    if xbar.differential:
        sides.append(("minus", xbar.g_minus))

    k = x.shape[0]
    stream = RandomStream(xbar.config.seed, xbar.config.stream_id)

    side_currents = []
    for side_name, g_side in sides:
        if stack.rtn is None:
            # Reads are deterministic without telegraph noise; averaging
            # identical repetitions is the single read.
            side_currents.append(_side_currents(g_side, v_cols, read, params, iv))
            continue
        acc = np.zeros((k, g_side.shape[1]))
        for s in range(k):
            sub = stream.substream("read", side_name, call_index, s)
            mult = rtn_multipliers(
                stack.rtn, read.n_avg, sub, n_cells=g_side.size
            )
            sample_acc = np.zeros(g_side.shape[1])
            for rep in range(read.n_avg):
                g_eff = g_side * mult[rep].reshape(g_side.shape)
                sample_acc += _side_currents(
                    g_eff, v_cols[:, s : s + 1], read, params, iv
                )[0]
            acc[s] = sample_acc / read.n_avg
        side_currents.append(acc)

    k_div = scheme.scaling.k_v * scheme.scaling.k_g
    if xbar.differential:
        return (side_currents[0] - side_currents[1]) / k_div
    full = side_currents[0]
    return (full[:, : xbar.cols] - full[:, xbar.cols :][:, :1]) / k_div


def vmm(xbar: Crossbar, x, read: ReadConfig, call_index: int = 0) -> np.ndarray:
    """Crossbar vector-matrix product for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"x must be one-dimensional, got shape {x.shape}")
    return vmm_batch(xbar, x[None, :], read, call_index)[0]
