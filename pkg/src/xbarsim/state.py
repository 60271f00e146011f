"""On-disk record formats for programmed arrays, weights, and run metadata.

Everything is JSON with full-precision floats (Python's repr round-trips
float64 exactly). Each file embeds the config digest and seed that produced
it so results stay traceable.
"""

from __future__ import annotations

import json

import numpy as np

from .crossbar import Crossbar, CrossbarConfig
from .devices import DeviceModel
from .errors import ConfigError
from .interconnect import LineResistanceParams
from .mapping import ConductanceWindow, LinearScaling, MappingScheme
from .nn import DenseLayer, Mlp
from .nonidealities import (
    D2DSpec,
    IVNonlinearityParam,
    NonidealityStack,
    PulseProgramming,
    RTNParams,
    StuckMask,
    StuckSpec,
)

CROSSBAR_FORMAT = "xbarsim.crossbar.state"
WEIGHTS_FORMAT = "xbarsim.weights.state"
META_FORMAT = "xbarsim.run.meta"
FORMAT_VERSION = 1


def _scheme_record(s: MappingScheme) -> dict:
    return {
        "variant": s.variant,
        "g_off": s.window.g_off,
        "g_on": s.window.g_on,
        "k_v": s.scaling.k_v,
        "k_g": s.scaling.k_g,
        "w_max_abs": s.w_max_abs,
        "w_min": s.w_min,
        "w_max": s.w_max,
        "power": s.power,
    }


def _scheme_from(rec: dict) -> MappingScheme:
    return MappingScheme(
        variant=rec["variant"],
        window=ConductanceWindow(rec["g_off"], rec["g_on"]),
        scaling=LinearScaling(rec["k_v"], rec["k_g"]),
        w_max_abs=rec["w_max_abs"],
        w_min=rec["w_min"],
        w_max=rec["w_max"],
        power=rec["power"],
    )


def _device_record(d: DeviceModel) -> dict:
    return {
        "name": d.name,
        "on_off_ratio": d.on_off_ratio,
        "g_off": d.g_off,
        "bits": d.bits,
        "programming_alpha": d.programming_alpha,
        "linear_programming": d.linear_programming,
        "programmable": d.programmable,
        "drift_nu": d.drift_nu,
        "suitable_for_inference": d.suitable_for_inference,
    }


def _device_from(rec: dict) -> DeviceModel:
    return DeviceModel(**rec)


def _stack_record(s: NonidealityStack) -> dict:
    return {
        "quantize_bits": s.quantize_bits,
        "max_pulses": s.pulses.max_pulses if s.pulses else None,
        "d2d_sigma": s.d2d.sigma if s.d2d else None,
        "stuck_p": s.stuck.p_stuck if s.stuck else None,
        "stuck_mode": s.stuck.mode if s.stuck else None,
        "drift_seconds": s.drift_seconds,
        "iv_gamma": s.iv.gamma if s.iv else None,
        "iv_v_read": s.iv.v_read if s.iv else None,
        "rtn_delta": s.rtn.delta if s.rtn else None,
        "rtn_tau_high": s.rtn.tau_high if s.rtn else None,
        "rtn_tau_low": s.rtn.tau_low if s.rtn else None,
    }


def _stack_from(rec: dict) -> NonidealityStack:
    return NonidealityStack(
        quantize_bits=rec["quantize_bits"],
        pulses=PulseProgramming(rec["max_pulses"]) if rec["max_pulses"] else None,
        d2d=D2DSpec(rec["d2d_sigma"]) if rec["d2d_sigma"] is not None else None,
        stuck=StuckSpec(rec["stuck_p"], rec["stuck_mode"])
        if rec["stuck_p"] is not None
        else None,
        drift_seconds=rec["drift_seconds"],
        iv=IVNonlinearityParam(rec["iv_gamma"], rec["iv_v_read"])
        if rec["iv_gamma"] is not None
        else None,
        rtn=RTNParams(rec["rtn_delta"], rec["rtn_tau_high"], rec["rtn_tau_low"])
        if rec["rtn_delta"] is not None
        else None,
    )


def _mask_record(mask: StuckMask | None):
    if mask is None:
        return None
    return {
        "flags": mask.flags.astype(int).tolist(),
        "values": mask.values.tolist(),
    }


def _mask_from(rec):
    if rec is None:
        return None
    return StuckMask(
        np.asarray(rec["flags"], dtype=bool), np.asarray(rec["values"], dtype=float)
    )


def crossbar_record(xbar: Crossbar) -> dict:
    cfg = xbar.config
    return {
        "rows": xbar.rows,
        "cols": xbar.cols,
        "scheme": _scheme_record(cfg.scheme),
        "device": _device_record(cfg.device),
        "stack": _stack_record(cfg.stack),
        "interconnect": {
            "r_word": cfg.interconnect.r_word,
            "r_bit": cfg.interconnect.r_bit,
            "biasing": cfg.interconnect.biasing,
        },
        "seed": cfg.seed,
        "stream_id": cfg.stream_id,
        "g_plus": xbar.g_plus.tolist(),
        "g_minus": None if xbar.g_minus is None else xbar.g_minus.tolist(),
        "mask_plus": _mask_record(xbar.mask_plus),
        "mask_minus": _mask_record(xbar.mask_minus),
    }


def crossbar_from_record(rec: dict) -> Crossbar:
    config = CrossbarConfig(
        scheme=_scheme_from(rec["scheme"]),
        device=_device_from(rec["device"]),
        stack=_stack_from(rec["stack"]),
        interconnect=LineResistanceParams(**rec["interconnect"]),
        seed=rec["seed"],
        stream_id=rec["stream_id"],
    )
    g_plus = np.asarray(rec["g_plus"], dtype=float)
    g_plus.flags.writeable = False
    g_minus = None
    if rec["g_minus"] is not None:
        g_minus = np.asarray(rec["g_minus"], dtype=float)
        g_minus.flags.writeable = False
    return Crossbar(
        g_plus=g_plus,
        g_minus=g_minus,
        mask_plus=_mask_from(rec["mask_plus"]),
        mask_minus=_mask_from(rec["mask_minus"]),
        config=config,
        rows=rec["rows"],
        cols=rec["cols"],
    )


def save_crossbars(path, crossbars, digest: str, seed: int):
    doc = {
        "format": CROSSBAR_FORMAT,
        "version": FORMAT_VERSION,
        "config_digest": digest,
        "seed": seed,
        "crossbars": [crossbar_record(x) for x in crossbars],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_crossbars(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CROSSBAR_FORMAT:
        raise ConfigError(f"{path} is not a crossbar state file")
    return [crossbar_from_record(rec) for rec in doc["crossbars"]], doc


def save_weights(path, net: Mlp, digest: str, seed: int):
    doc = {
        "format": WEIGHTS_FORMAT,
        "version": FORMAT_VERSION,
        "config_digest": digest,
        "seed": seed,
        "layers": [
            {"activation": layer.activation, "w": layer.w.tolist()}
            for layer in net.layers
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_weights(path) -> Mlp:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != WEIGHTS_FORMAT:
        raise ConfigError(f"{path} is not a weights state file")
    return Mlp(
        [
            DenseLayer(np.asarray(rec["w"], dtype=float), rec["activation"])
            for rec in doc["layers"]
        ]
    )


def save_run_meta(path, command: str, digest: str, seed: int, version: str):
    doc = {
        "format": META_FORMAT,
        "version": FORMAT_VERSION,
        "command": command,
        "config_digest": digest,
        "seed": seed,
        "xbarsim_version": version,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
