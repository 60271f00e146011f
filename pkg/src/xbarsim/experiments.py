"""Experiment orchestration behind the CLI subcommands.

Builds simulator objects from a validated config, runs the requested flow
(program / infer / sweep / train / report), and writes deterministic,
plot-ready tables. Every repetition derives its own recorded seed, so rows
are reproducible individually and output files are byte-stable for a given
(config, seed).
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import apply_sweep_value, config_digest
from .core import RandomStream
from .crossbar import CrossbarConfig, ReadConfig, program
from .datasets import load_dataset, synthetic_digits
from .devices import preset, preset_table
from .errors import ConfigError
from .interconnect import LineResistanceParams
from .mapping import DIFFERENTIAL_PAIR, ConductanceWindow, MappingScheme
from .mitigation import (
    compensate_stuck,
    intensity_scores,
    order_rows,
    sensitivity_row_scores,
)
from .nn import (
    CrossbarMlpBackend,
    DenseLayer,
    Mlp,
    TrainConfig,
    _forward_batch,
    evaluate,
    init_mlp,
    sensitivity,
    train_sgd,
)
from .nonidealities import (
    D2DSpec,
    IVNonlinearityParam,
    NonidealityStack,
    PulseProgramming,
    RTNParams,
    StuckSpec,
)
from .state import (
    load_crossbars,
    load_weights,
    save_crossbars,
    save_run_meta,
    save_weights,
)

RESULTS_FILE = "results.csv"
CROSSBAR_FILE = "crossbar.state"
WEIGHTS_FILE = "weights.state"
META_FILE = "run.meta"
DEVICES_FILE = "devices.csv"
COMPENSATION_FILE = "compensation.csv"


# -- builders ----------------------------------------------------------------


def build_device(cfg):
    model = preset(cfg["device"]["preset"])
    overrides = {}
    if cfg["device"]["g_off"] is not None:
        overrides["g_off"] = cfg["device"]["g_off"]
    if cfg["device"]["on_off_ratio"] is not None:
        overrides["on_off_ratio"] = cfg["device"]["on_off_ratio"]
    if cfg["device"]["bits"] is not None:
        overrides["bits"] = cfg["device"]["bits"]
    return model.replace(**overrides) if overrides else model


def build_interconnect(cfg) -> LineResistanceParams:
    section = cfg["interconnect"]
    r_line = section["r_line"]
    r_word = section["r_word"] if r_line is None else r_line
    r_bit = section["r_bit"] if r_line is None else r_line
    return LineResistanceParams(r_word, r_bit, section["biasing"])


def build_read(cfg) -> ReadConfig:
    section = cfg["read"]
    return ReadConfig(
        v_read=section["v_read"],
        n_avg=section["n_avg"],
        encoding=section["encoding"],
        pulse_slots=section["pulse_slots"],
    )


def build_stack(cfg, device) -> NonidealityStack:
    section = cfg["nonidealities"]
    return NonidealityStack(
        quantize_bits=device.bits if section["quantize"] else None,
        pulses=PulseProgramming(section["pulses"]["max_pulses"])
        if section["pulses"]["enabled"]
        else None,
        d2d=D2DSpec(section["d2d"]["sigma"]) if section["d2d"]["sigma"] > 0 else None,
        stuck=StuckSpec(section["stuck"]["p"], section["stuck"]["mode"])
        if section["stuck"]["p"] > 0
        else None,
        drift_seconds=section["drift"]["seconds"],
        iv=IVNonlinearityParam(section["iv"]["gamma"], cfg["read"]["v_read"])
        if section["iv"]["gamma"] > 0
        else None,
        rtn=RTNParams(
            section["rtn"]["delta"],
            section["rtn"]["tau_high"],
            section["rtn"]["tau_low"],
        )
        if section["rtn"]["enabled"]
        else None,
    )


def layer_scheme(cfg, device, w) -> MappingScheme:
    window = ConductanceWindow(device.g_off, device.g_on)
    w_abs = cfg["mapping"]["w_max_abs"]
    if w_abs is None:
        w_abs = max(float(np.abs(w).max()), 1e-12)
    variant = cfg["mapping"]["scheme"]
    k_v = cfg["mapping"]["k_v"]
    if variant == "differential_pair":
        return MappingScheme.differential_pair(window, w_abs, k_v=k_v)
    if variant == "naive":
        return MappingScheme.naive(window, -w_abs, w_abs, k_v=k_v)
    return MappingScheme.nonlinear_power(
        window, -w_abs, w_abs, cfg["mapping"]["power"], k_v=k_v
    )


def layer_crossbar_config(cfg, device, stack, interconnect, w, seed, stream_id):
    return CrossbarConfig(
        scheme=layer_scheme(cfg, device, w),
        device=device,
        stack=stack,
        interconnect=interconnect,
        seed=seed,
        stream_id=stream_id,
    )


def load_data(cfg):
    """(x_train, y_train, x_test, y_test) from the builtin set or a file."""
    section = cfg["dataset"]
    if section["source"] == "builtin":
        return synthetic_digits(
            n_train=section["train_samples"],
            n_test=section["test_samples"],
            noise=section["noise"],
        )
    x, y = load_dataset(section["source"])
    order = RandomStream(cfg["seed"], "dataset-split").permutation(x.shape[0])
    n_train = max(1, int(0.75 * x.shape[0]))
    train, test = order[:n_train], order[n_train:]
    if test.size == 0:
        test = train
    return x[train], y[train], x[test], y[test]


def build_network(cfg, data=None) -> Mlp:
    if cfg["network"]["weights"]:
        return load_weights(cfg["network"]["weights"])
    sizes = list(cfg["network"]["layer_sizes"])
    return init_mlp(sizes, list(cfg["network"]["activations"]), RandomStream(cfg["seed"], "net-init"))


# -- mitigation hooks --------------------------------------------------------


def reorder_network(net, criterion, x_cal, y_cal, eta):
    """Network with per-layer row permutations applied; returns (net, input perm).

    Hidden-unit relabeling keeps the exact function unchanged; the payoff is
    where rows land physically on each crossbar. The bias row stays pinned
    last. The returned input permutation must be applied to the features
    before crossbar-backed evaluation.
    """
    if criterion == "sensitivity":
        smap = sensitivity(net, (x_cal, y_cal), eta)
        scores = [sensitivity_row_scores(m[:-1, :]) for m in smap]
    else:
        _, acts = _forward_batch(net, x_cal)
        scores = [intensity_scores(acts[li]) for li in range(len(net.layers))]
    perms = [order_rows(s, criterion) for s in scores]
    new_w = [layer.w.copy() for layer in net.layers]
    for li, perm in enumerate(perms):
        new_w[li][:-1, :] = new_w[li][:-1, :][perm.forward, :]
        if li > 0:
            new_w[li - 1] = new_w[li - 1][:, perm.forward]
    reordered = Mlp(
        [DenseLayer(w, layer.activation) for w, layer in zip(new_w, net.layers)]
    )
    return reordered, perms[0]


def program_backend(cfg, net, rep_seed, read):
    """Crossbars for every layer, with the configured mitigations applied."""
    device = build_device(cfg)
    stack = build_stack(cfg, device)
    interconnect = build_interconnect(cfg)
    xbars = []
    reports = []
    for li, layer in enumerate(net.layers):
        config = layer_crossbar_config(
            cfg, device, stack, interconnect, layer.w, rep_seed, f"layer-{li}"
        )
        xbar = program(layer.w, config)
        if cfg["mitigation"]["compensate_stuck"]:
            xbar, report = compensate_stuck(xbar, layer.w)
            reports.append(report)
        xbars.append(xbar)
    return CrossbarMlpBackend(xbars, read), reports


def layer_weight_error(xbar, w) -> float:
    """Mean |represented weight - target| for one programmed layer."""
    k_g = xbar.config.scheme.scaling.k_g
    if xbar.config.scheme.variant == DIFFERENTIAL_PAIR:
        represented = (xbar.g_plus - xbar.g_minus) / k_g
    else:
        g_ref = xbar.g_plus[:, xbar.cols:][:, :1]
        represented = (xbar.g_plus[:, : xbar.cols] - g_ref) / k_g
    return float(np.abs(represented - w).mean())


# -- metric flows -------------------------------------------------------------


def _eval_set(cfg, data):
    _, _, x_test, y_test = data
    limit = cfg["dataset"]["eval_limit"]
    if limit is not None:
        x_test, y_test = x_test[:limit], y_test[:limit]
    return x_test, y_test


def _loaded_backend(cfg, net, read):
    """Backend from a saved crossbar state, checked against the network shape."""
    crossbars, _ = load_crossbars(cfg["network"]["crossbar_state"])
    if len(crossbars) != len(net.layers):
        raise ConfigError(
            f"saved state holds {len(crossbars)} crossbars for {len(net.layers)} layers"
        )
    for li, (xbar, layer) in enumerate(zip(crossbars, net.layers)):
        if (xbar.rows, xbar.cols) != layer.w.shape:
            raise ConfigError(
                f"layer {li}: saved crossbar is {xbar.rows}x{xbar.cols}, "
                f"weights are {layer.w.shape[0]}x{layer.w.shape[1]}"
            )
    if cfg["mitigation"]["compensate_stuck"]:
        crossbars = [
            compensate_stuck(xbar, layer.w)[0]
            for xbar, layer in zip(crossbars, net.layers)
        ]
    return CrossbarMlpBackend(crossbars, read)


def infer_metrics(cfg, net, data, rep_seed) -> dict:
    """Accuracy and deviation metrics of one crossbar deployment."""
    read = build_read(cfg)
    x_eval, y_eval = _eval_set(cfg, data)
    criterion = cfg["mitigation"]["reorder"]
    if criterion:
        x_cal = data[0][:64]
        y_cal = data[1][:64]
        net_eval, input_perm = reorder_network(
            net, criterion, x_cal, y_cal, cfg["train"]["eta"]
        )
        x_backend = x_eval[:, input_perm.forward]
    else:
        net_eval, x_backend = net, x_eval
    if cfg["network"]["crossbar_state"]:
        backend = _loaded_backend(cfg, net_eval, read)
    else:
        backend, _ = program_backend(cfg, net_eval, rep_seed, read)
    acc_exact, out_exact = evaluate(net, x_eval, y_eval)
    acc_xbar, out_xbar = evaluate(net_eval, x_backend, y_eval, backend=backend)
    deviation = np.abs(out_xbar - out_exact)
    metrics = {
        "accuracy_exact": acc_exact,
        "accuracy_crossbar": acc_xbar,
        "output_mad": float(deviation.mean()),
        "output_max_dev": float(deviation.max()),
    }
    for li, (xbar, layer) in enumerate(zip(backend.crossbars, net_eval.layers)):
        metrics[f"weight_error_l{li}"] = layer_weight_error(xbar, layer.w)
    return metrics


def _rep_seed(cfg, sweep_index, repetition) -> int:
    return RandomStream(cfg["seed"], "repetitions").derive_seed(sweep_index, repetition)


def run_infer(cfg):
    data = load_data(cfg)
    net = build_network(cfg)
    rows = []
    for rep in range(cfg["repetitions"]):
        seed = _rep_seed(cfg, 0, rep)
        metrics = infer_metrics(cfg, net, data, seed)
        rows.extend((None, rep, seed, k, v) for k, v in metrics.items())
    return rows


def _sweep_task(args):
    cfg, sweep_index, value, rep = args
    point_cfg = apply_sweep_value(cfg, cfg["sweep"]["path"], value)
    seed = _rep_seed(cfg, sweep_index, rep)
    data = load_data(point_cfg)
    net = build_network(point_cfg)
    metrics = infer_metrics(point_cfg, net, data, seed)
    return [(value, rep, seed, k, v) for k, v in metrics.items()]


def run_sweep(cfg, jobs: int = 1):
    if cfg["sweep"]["path"] is None:
        raise ConfigError("sweep requires sweep.path and sweep.values")
    values = sorted(cfg["sweep"]["values"])
    tasks = [
        (cfg, si, value, rep)
        for si, value in enumerate(values)
        for rep in range(cfg["repetitions"])
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_task, tasks))
    else:
        chunks = [_sweep_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    return rows


def run_train(cfg, out_dir):
    data = load_data(cfg)
    x_train, y_train, x_test, y_test = data
    net = build_network(cfg)
    section = cfg["train"]
    aware_factory = None
    aware_read = None
    if section["noise_mode"] == "aware":
        device = build_device(cfg)
        stack = build_stack(cfg, device)
        interconnect = build_interconnect(cfg)
        aware_read = build_read(cfg)

        def aware_factory(li, w, batch_ids):
            return layer_crossbar_config(
                cfg, device, stack, interconnect, w, cfg["seed"],
                f"aware-{li}-{batch_ids[0]}-{batch_ids[1]}",
            )

    train_cfg = TrainConfig(
        eta=section["eta"],
        epochs=section["epochs"],
        batch_size=section["batch_size"],
        loss=section["loss"],
        noise_mode=section["noise_mode"],
        sigma_w=section["sigma_w"],
        seed=cfg["seed"],
        aware_config_for_layer=aware_factory,
        aware_read=aware_read,
    )
    trained, history = train_sgd(net, (x_train, y_train), train_cfg)
    train_acc, _ = evaluate(trained, x_train, y_train)
    test_acc, _ = evaluate(trained, x_test, y_test)
    digest = config_digest(cfg)
    save_weights(os.path.join(out_dir, WEIGHTS_FILE), trained, digest, cfg["seed"])
    rows = [
        (None, 0, cfg["seed"], "test_accuracy", test_acc),
        (None, 0, cfg["seed"], "train_accuracy", train_acc),
        (None, 0, cfg["seed"], "train_loss_final", history[-1]),
    ]
    return rows


def run_program(cfg, out_dir):
    net = build_network(cfg)
    seed = _rep_seed(cfg, 0, 0)
    read = build_read(cfg)
    backend, _ = program_backend(cfg, net, seed, read)
    digest = config_digest(cfg)
    save_crossbars(os.path.join(out_dir, CROSSBAR_FILE), backend.crossbars, digest, cfg["seed"])
    rows = []
    for li, (xbar, layer) in enumerate(zip(backend.crossbars, net.layers)):
        rows.append((None, 0, seed, f"weight_error_l{li}", layer_weight_error(xbar, layer.w)))
    return rows


def run_report(cfg, out_dir):
    digest = config_digest(cfg)
    table = preset_table()
    fields = list(table[0].keys())
    with open(os.path.join(out_dir, DEVICES_FILE), "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_digest={digest} seed={cfg['seed']} xbarsim={__version__}\n")
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in table:
            writer.writerow(row)
    rows = [(None, 0, cfg["seed"], "devices_reported", float(len(table)))]
    if cfg["nonidealities"]["stuck"]["p"] > 0 and cfg["mapping"]["scheme"] == "differential_pair":
        net = build_network(cfg)
        seed = _rep_seed(cfg, 0, 0)
        device = build_device(cfg)
        stack = build_stack(cfg, device)
        interconnect = build_interconnect(cfg)
        comp_rows = []
        adjusted = 0
        for li, layer in enumerate(net.layers):
            config = layer_crossbar_config(
                cfg, device, stack, interconnect, layer.w, seed, f"layer-{li}"
            )
            xbar = program(layer.w, config)
            _, report = compensate_stuck(xbar, layer.w)
            adjusted += report.n_adjusted
            for rec in report.rows():
                rec["layer"] = li
                comp_rows.append(rec)
        comp_fields = ["layer", "row", "col", "side", "new_value",
                       "residual_weight_error", "both_stuck"]
        path = os.path.join(out_dir, COMPENSATION_FILE)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_digest={digest} seed={cfg['seed']} xbarsim={__version__}\n")
            writer = csv.DictWriter(fh, fieldnames=comp_fields)
            writer.writeheader()
            for rec in comp_rows:
                writer.writerow(rec)
        rows.append((None, 0, cfg["seed"], "cells_compensated", float(adjusted)))
    return rows


# -- output -------------------------------------------------------------------


def _format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(out_dir, rows, digest, seed):
    """results.csv: one row per (sweep value, repetition, metric), sorted."""

    def key(row):
        sweep_value, rep, _, metric, _ = row
        return (sweep_value is not None, sweep_value or 0.0, rep, metric)

    path = os.path.join(out_dir, RESULTS_FILE)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_digest={digest} seed={seed} xbarsim={__version__}\n")
        fh.write("sweep_value,repetition,seed,metric,value\n")
        for sweep_value, rep, row_seed, metric, value in sorted(rows, key=key):
            sv = "" if sweep_value is None else repr(float(sweep_value))
            fh.write(f"{sv},{rep},{row_seed},{metric},{_format_value(value)}\n")
    return path


def write_meta(out_dir, command, digest, seed):
    save_run_meta(os.path.join(out_dir, META_FILE), command, digest, seed, __version__)
