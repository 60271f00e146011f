"""Algorithmic countermeasures against device and interconnect nonidealities.

Stuck cells in a differential pair are compensated by re-programming the
free partner so the pair difference still encodes the weight (clipped to the
window, residual recorded). Row reordering realizes the two mapping
heuristics: importance-ranked rows nearest the drive side, or
intensity-ranked rows nearest the output terminations where bit-line IR drop
hurts least. The power-law mapping exponent is calibrated by grid search
against simulated readout error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import as_matrix, as_vector
from .crossbar import CrossbarConfig, ReadConfig, program, read_conductances, vmm_batch, with_conductances
from .errors import ParameterError, ShapeError, UnsupportedSchemeError
from .mapping import DIFFERENTIAL_PAIR, MappingScheme

CRITERION_SENSITIVITY = "sensitivity"
CRITERION_INTENSITY = "intensity"

PLACE_DRIVE_SIDE = "drive_side"
PLACE_TERMINATION_SIDE = "termination_side"


@dataclass(frozen=True)
class Permutation:
    """forward[position] = original index; inverse[original index] = position."""

    forward: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.forward)
        inv = np.asarray(self.inverse)
        if not np.array_equal(inv[f], np.arange(f.size)):
            raise ParameterError("forward and inverse maps are not mutual inverses")

    @classmethod
    def from_forward(cls, forward) -> "Permutation":
        f = np.asarray(forward, dtype=np.int64)
        inv = np.empty_like(f)
        inv[f] = np.arange(f.size)
        return cls(f, inv)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        idx = np.arange(n, dtype=np.int64)
        return cls(idx, idx.copy())


@dataclass
class CompensationReport:
    """Adjusted cells (row, col, pair side, new conductance) and residual weight errors."""

    adjusted: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    both_stuck: list = field(default_factory=list)  # (row, col, residual)

    @property
    def n_adjusted(self) -> int:
        return len(self.adjusted)

    def rows(self):
        """Flat records for delimiter-separated export."""
        out = []
        for (r, c, side, value), resid in zip(self.adjusted, self.residuals):
            out.append(
                {"row": r, "col": c, "side": side, "new_value": value,
                 "residual_weight_error": resid, "both_stuck": False}
            )
        for r, c, resid in self.both_stuck:
            out.append(
                {"row": r, "col": c, "side": "", "new_value": "",
                 "residual_weight_error": resid, "both_stuck": True}
            )
        return out


def compensate_stuck(xbar, w_target):
    """Re-program free differential partners so G+ - G- tracks k_G w again.

    Where exactly one pair member is stuck, the free one is set (clipped to
    the window) to restore the encoded weight; the per-cell weight error
    never increases. Where both members are stuck nothing can move, so only
    the residual is recorded. Returns (new crossbar, report).
    """
    config: CrossbarConfig = xbar.config
    if config.scheme.variant != DIFFERENTIAL_PAIR:
        raise UnsupportedSchemeError(
            "stuck compensation needs the differential_pair scheme"
        )
    w = as_matrix(w_target, "W_target")
    if w.shape != (xbar.rows, xbar.cols):
        raise ShapeError(
            f"target shape {w.shape} does not match the array ({xbar.rows}, {xbar.cols})"
        )
    window = config.scheme.window
    k_g = config.scheme.scaling.k_g
    g_plus, g_minus, _ = read_conductances(xbar)
    report = CompensationReport()
    plus_flags = xbar.mask_plus.flags
    minus_flags = xbar.mask_minus.flags
    for i, j in np.argwhere(plus_flags | minus_flags):
        kw = k_g * w[i, j]
        if plus_flags[i, j] and minus_flags[i, j]:
            resid = abs((g_plus[i, j] - g_minus[i, j]) - kw) / k_g
            report.both_stuck.append((int(i), int(j), float(resid)))
            continue
        if plus_flags[i, j]:
            wanted = g_plus[i, j] - kw
            new_value = min(max(wanted, window.g_off), window.g_on)
            g_minus[i, j] = new_value
            side = "minus"
        else:
            wanted = g_minus[i, j] + kw
            new_value = min(max(wanted, window.g_off), window.g_on)
            g_plus[i, j] = new_value
            side = "plus"
        resid = abs((g_plus[i, j] - g_minus[i, j]) - kw) / k_g
        report.adjusted.append((int(i), int(j), side, float(new_value)))
        report.residuals.append(float(resid))
    return with_conductances(xbar, g_plus, g_minus), report


def weight_errors(xbar, w_target) -> np.ndarray:
    """Per-cell |(G+ - G-)/k_G - w| of a differential-pair crossbar."""
    if xbar.config.scheme.variant != DIFFERENTIAL_PAIR:
        raise UnsupportedSchemeError("weight error readout needs differential pairs")
    w = as_matrix(w_target, "W_target")
    k_g = xbar.config.scheme.scaling.k_g
    return np.abs((xbar.g_plus - xbar.g_minus) / k_g - w)


def sensitivity_row_scores(delta_w: np.ndarray) -> np.ndarray:
    """Row importance from a sensitivity map layer: mean |delta w| per row."""
    return np.abs(as_matrix(delta_w, "sensitivity map")).mean(axis=1)


def intensity_scores(x_batch) -> np.ndarray:
    """Expected input intensity per row: mean |x| over the calibration batch."""
    return np.abs(as_matrix(x_batch, "calibration inputs")).mean(axis=0)


def order_rows(scores, criterion: str = CRITERION_SENSITIVITY,
               direction: str | None = None) -> Permutation:
    """Rank rows by score and place them per the criterion.

    Sensitivity scores go descending from the drive side (position 0);
    intensity scores go descending toward the output terminations (last
    position). Ties keep ascending original index, so equal scores give the
    identity permutation. `direction` overrides the placement.
    """
    scores = as_vector(np.asarray(scores, dtype=np.float64), "scores")
    if criterion not in (CRITERION_SENSITIVITY, CRITERION_INTENSITY):
        raise ParameterError(f"unknown ordering criterion {criterion!r}")
    if direction is None:
        direction = (
            PLACE_DRIVE_SIDE if criterion == CRITERION_SENSITIVITY else PLACE_TERMINATION_SIDE
        )
    if direction not in (PLACE_DRIVE_SIDE, PLACE_TERMINATION_SIDE):
        raise ParameterError(f"unknown placement direction {direction!r}")
    idx = np.arange(scores.size)
    if direction == PLACE_DRIVE_SIDE:
        forward = np.lexsort((idx, -scores))
    else:
        forward = np.lexsort((idx, scores))
    return Permutation.from_forward(forward)


def apply_permuted_mapping(w, x, perm_rows: Permutation, perm_cols: Permutation):
    """Relabel rows/columns before programming; outputs are unpermuted after.

    Returns (W', x', unpermute) with W' = W[rows][:, cols], x' permuted the
    same way, and unpermute restoring the original output order.
    """
    w = as_matrix(w, "W")
    x = as_vector(x, "x")
    if x.shape[0] != w.shape[0]:
        raise ShapeError(f"input length {x.shape[0]} does not match {w.shape[0]} rows")
    if perm_rows.forward.size != w.shape[0] or perm_cols.forward.size != w.shape[1]:
        raise ShapeError("permutation sizes do not match the matrix")
    w_perm = w[perm_rows.forward][:, perm_cols.forward]
    x_perm = x[perm_rows.forward]

    def unpermute(y):
        y = np.asarray(y)
        return y[..., perm_cols.inverse]

    return w_perm, x_perm, unpermute


def calibrate_nonlinear_mapping(w, x_calibration, p_grid, base_config: CrossbarConfig,
                                read: ReadConfig | None = None) -> float:
    """Grid-search the power-law exponent that minimizes readout error.

    Programs and reads the calibration batch for every exponent in the grid
    and returns the one with the lowest mean |y - y_ideal| (ties go to the
    smallest exponent).
    """
    p_values = sorted(float(p) for p in p_grid)
    if not p_values:
        raise ParameterError("p_grid must not be empty")
    w = as_matrix(w, "W")
    x = as_matrix(x_calibration, "calibration batch")
    read = read or ReadConfig()
    scheme = base_config.scheme
    if scheme.w_min is None or scheme.w_max is None:
        raise ParameterError("base config must carry a naive-style weight range")
    y_ideal = x @ w
    best_p, best_err = None, None
    for p in p_values:
        scheme_p = MappingScheme.nonlinear_power(
            scheme.window, scheme.w_min, scheme.w_max, p, scheme.scaling.k_v
        )
        config_p = replace(base_config, scheme=scheme_p)
        xbar = program(w, config_p)
        y = vmm_batch(xbar, x, read)
        err = float(np.abs(y - y_ideal).mean())
        if best_err is None or err < best_err:
            best_p, best_err = p, err
    return best_p
