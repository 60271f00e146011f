"""Experiment configuration: schema, validation, round-trip serialization.

Configs are YAML documents over a fixed key tree. Parsing normalizes against
the defaults; validation returns every violation (unknown fields, type and
range errors, unresolvable sweep paths) instead of stopping at the first.
The canonical digest hashes the normalized config so every output file can
be traced back to the exact settings that produced it.
"""

from __future__ import annotations

import copy
import hashlib
import json

import yaml

from .devices import PRESET_NAMES
from .errors import ConfigError

_ACTIVATION_CHOICES = ("logistic", "relu", "softmax", "identity", "step")


class _Field:
    def __init__(self, kind, default, low=None, high=None, choices=None,
                 nullable=False, low_exclusive=False):
        self.kind = kind
        self.default = default
        self.low = low
        self.high = high
        self.choices = choices
        self.nullable = nullable
        self.low_exclusive = low_exclusive

    def check(self, path, value, issues):
        if value is None:
            if not self.nullable:
                issues.append(f"{path}: must not be null")
            return
        if self.kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                issues.append(f"{path}: expected an integer, got {value!r}")
                return
        elif self.kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                issues.append(f"{path}: expected a number, got {value!r}")
                return
        elif self.kind == "bool":
            if not isinstance(value, bool):
                issues.append(f"{path}: expected true/false, got {value!r}")
                return
        elif self.kind == "str":
            if not isinstance(value, str):
                issues.append(f"{path}: expected a string, got {value!r}")
                return
        if self.choices is not None and value not in self.choices:
            issues.append(
                f"{path}: {value!r} is not one of {', '.join(map(str, self.choices))}"
            )
            return
        if self.low is not None:
            if self.low_exclusive and not value > self.low:
                issues.append(f"{path}: must be > {self.low}, got {value}")
            elif not self.low_exclusive and not value >= self.low:
                issues.append(f"{path}: must be >= {self.low}, got {value}")
        if self.high is not None and not value <= self.high:
            issues.append(f"{path}: must be <= {self.high}, got {value}")


class _ListField:
    def __init__(self, item: _Field, default, min_len=0, nullable=False):
        self.item = item
        self.default = default
        self.min_len = min_len
        self.nullable = nullable

    def check(self, path, value, issues):
        if value is None:
            if not self.nullable:
                issues.append(f"{path}: must not be null")
            return
        if not isinstance(value, list):
            issues.append(f"{path}: expected a list, got {value!r}")
            return
        if len(value) < self.min_len:
            issues.append(f"{path}: needs at least {self.min_len} entries")
        for i, item in enumerate(value):
            self.item.check(f"{path}[{i}]", item, issues)


SCHEMA = {
    "seed": _Field("int", 0, low=0),
    "repetitions": _Field("int", 1, low=1),
    "dataset": {
        "source": _Field("str", "builtin"),
        "noise": _Field("float", 0.5, low=0.0),
        "train_samples": _Field("int", 600, low=10),
        "test_samples": _Field("int", 200, low=10),
        "eval_limit": _Field("int", None, low=1, nullable=True),
    },
    "network": {
        "layer_sizes": _ListField(_Field("int", None, low=1), [64, 16, 10], min_len=2),
        "activations": _ListField(
            _Field("str", None, choices=_ACTIVATION_CHOICES), ["logistic", "softmax"], min_len=1
        ),
        "weights": _Field("str", None, nullable=True),
        "crossbar_state": _Field("str", None, nullable=True),
    },
    "device": {
        "preset": _Field("str", "RRAM", choices=PRESET_NAMES),
        "g_off": _Field("float", None, low=0.0, low_exclusive=True, nullable=True),
        "on_off_ratio": _Field("float", None, low=1.0, low_exclusive=True, nullable=True),
        "bits": _Field("int", None, low=1, nullable=True),
    },
    "mapping": {
        "scheme": _Field(
            "str", "differential_pair",
            choices=("differential_pair", "naive", "nonlinear_power"),
        ),
        "power": _Field("float", 1.0, low=0.0, low_exclusive=True),
        "k_v": _Field("float", 0.2, low=0.0, low_exclusive=True),
        "w_max_abs": _Field("float", None, low=0.0, low_exclusive=True, nullable=True),
    },
    "nonidealities": {
        "quantize": _Field("bool", False),
        "pulses": {
            "enabled": _Field("bool", False),
            "max_pulses": _Field("int", 100, low=1),
        },
        "d2d": {"sigma": _Field("float", 0.0, low=0.0)},
        "stuck": {
            "p": _Field("float", 0.0, low=0.0, high=1.0),
            "mode": _Field(
                "str", "at_G_off", choices=("at_G_off", "at_G_on", "at_random_level")
            ),
        },
        "iv": {"gamma": _Field("float", 0.0, low=0.0)},
        "rtn": {
            "enabled": _Field("bool", False),
            "delta": _Field("float", 0.1, low=0.0),
            "tau_high": _Field("float", 2.0, low=1.0),
            "tau_low": _Field("float", 8.0, low=1.0),
        },
        "drift": {"seconds": _Field("float", None, low=1.0, nullable=True)},
    },
    "interconnect": {
        "r_word": _Field("float", 0.0, low=0.0),
        "r_bit": _Field("float", 0.0, low=0.0),
        "r_line": _Field("float", None, low=0.0, nullable=True),
        "biasing": _Field("str", "single", choices=("single", "double")),
    },
    "read": {
        "v_read": _Field("float", 0.2, low=0.0, low_exclusive=True),
        "n_avg": _Field("int", 1, low=1),
        "encoding": _Field("str", "amplitude", choices=("amplitude", "pulse_width")),
        "pulse_slots": _Field("int", 256, low=1, nullable=True),
    },
    "train": {
        "eta": _Field("float", 0.5, low=0.0, low_exclusive=True),
        "epochs": _Field("int", 30, low=1),
        "batch_size": _Field("int", 32, low=1),
        "loss": _Field("str", "cross_entropy", choices=("mse", "cross_entropy")),
        "noise_mode": _Field("str", "none", choices=("none", "agnostic", "aware")),
        "sigma_w": _Field("float", 0.0, low=0.0),
    },
    "mitigation": {
        "compensate_stuck": _Field("bool", False),
        "reorder": _Field(
            "str", None, choices=("sensitivity", "intensity"), nullable=True
        ),
    },
    "sweep": {
        "path": _Field("str", None, nullable=True),
        "values": _ListField(_Field("float", None), None, min_len=1, nullable=True),
    },
}


def _defaults(schema) -> dict:
    out = {}
    for key, node in schema.items():
        if isinstance(node, dict):
            out[key] = _defaults(node)
        else:
            out[key] = copy.deepcopy(node.default)
    return out


def default_config() -> dict:
    return _defaults(SCHEMA)


def _walk(schema, data, path, issues, merged):
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            issues.append(f"{here}: unknown field")
            continue
        node = schema[key]
        if isinstance(node, dict):
            if not isinstance(value, dict):
                issues.append(f"{here}: expected a mapping")
                continue
            _walk(node, value, here, issues, merged[key])
        else:
            node.check(here, value, issues)
            merged[key] = copy.deepcopy(value)


def _resolve_sweep_path(path: str):
    """Return the schema leaf for a dotted sweep path, or None."""
    node = SCHEMA
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node if isinstance(node, (_Field,)) else None


def _semantic_checks(cfg, issues):
    net = cfg["network"]
    if net["layer_sizes"] is not None and net["activations"] is not None:
        if len(net["activations"]) != len(net["layer_sizes"]) - 1:
            issues.append(
                "network.activations: need exactly one activation per layer "
                f"({len(net['layer_sizes']) - 1}), got {len(net['activations'])}"
            )
    if cfg["train"]["noise_mode"] == "agnostic" and not cfg["train"]["sigma_w"] > 0:
        issues.append("train.sigma_w: agnostic noise injection needs sigma_w > 0")
    sweep = cfg["sweep"]
    if (sweep["path"] is None) != (sweep["values"] is None):
        issues.append("sweep: path and values must be given together")
    if sweep["path"] is not None:
        leaf = _resolve_sweep_path(sweep["path"])
        if leaf is None:
            issues.append(f"sweep.path: {sweep['path']!r} does not name a config field")
        elif leaf.kind not in ("int", "float"):
            issues.append(f"sweep.path: {sweep['path']!r} is not a numeric parameter")
        elif sweep["values"]:
            for i, v in enumerate(sweep["values"]):
                probe = []
                leaf.check(f"sweep.values[{i}]", v, probe)
                issues.extend(probe)
    if cfg["mitigation"]["compensate_stuck"] and cfg["mapping"]["scheme"] != "differential_pair":
        issues.append(
            "mitigation.compensate_stuck: requires the differential_pair mapping scheme"
        )
    if cfg["network"]["crossbar_state"] and cfg["mitigation"]["reorder"]:
        issues.append(
            "mitigation.reorder: cannot reorder a network deployed from a saved crossbar state"
        )


def parse_config_text(text: str):
    """Parse YAML and merge with defaults; returns (config, issue list)."""
    issues: list[str] = []
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        return None, [f"invalid YAML: {exc}"]
    if data is None:
        data = {}
    if not isinstance(data, dict):
        return None, ["top level must be a mapping"]
    merged = default_config()
    _walk(SCHEMA, data, "", issues, merged)
    if not issues:
        _semantic_checks(merged, issues)
    return merged, issues


def load_config(path, overrides: dict | None = None) -> dict:
    """Load and validate a config file; raises ConfigError with diagnostics."""
    issues = validate_config(path)
    if issues:
        raise ConfigError("; ".join(issues))
    with open(path, "r", encoding="utf-8") as fh:
        cfg, _ = parse_config_text(fh.read())
    if overrides:
        for key, value in overrides.items():
            cfg[key] = value
    return cfg


def validate_config(path) -> list[str]:
    """All diagnostics for a config file; an empty list means runnable."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    _, issues = parse_config_text(text)
    return issues


def serialize_config(cfg: dict) -> str:
    """Canonical YAML; parse(serialize(cfg)) equals cfg."""
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def config_digest(cfg: dict) -> str:
    """sha256 of the canonical JSON encoding of the normalized config."""
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_sweep_value(cfg: dict, path: str, value):
    """Copy of the config with the dotted path set to the value."""
    out = copy.deepcopy(cfg)
    parts = path.split(".")
    node = out
    for part in parts[:-1]:
        node = node[part]
    leaf = _resolve_sweep_path(path)
    if leaf is None:
        raise ConfigError(f"sweep path {path!r} does not name a config field")
    node[parts[-1]] = int(value) if leaf.kind == "int" else float(value)
    return out
