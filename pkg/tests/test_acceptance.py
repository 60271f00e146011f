"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and measured margins.
"""

import time

import numpy as np
import pytest

from oracles import dense_crossbar_solve
from xbarsim.cli import main as cli_main
from xbarsim.config import parse_config_text, serialize_config
from xbarsim.core import RandomStream, finite_diff_grad, matvec_ref, seeded_stream
from xbarsim.crossbar import CrossbarConfig, ReadConfig, program, vmm, vmm_batch
from xbarsim.datasets import synthetic_digits
from xbarsim.devices import DeviceModel, preset
from xbarsim.errors import RangeError
from xbarsim.interconnect import LineResistanceParams, solve_crossbar
from xbarsim.mapping import (
    ConductanceWindow,
    MappingScheme,
    decode_outputs,
    encode_inputs,
    weights_to_diff_pair,
)
from xbarsim.mitigation import compensate_stuck, weight_errors
from xbarsim.nn import (
    CrossbarMlpBackend,
    Mlp,
    TrainConfig,
    evaluate,
    gradients,
    init_mlp,
    one_hot,
    sensitivity,
    train_sgd,
)
from xbarsim.nonidealities import (
    D2DSpec,
    IVNonlinearityParam,
    NonidealityStack,
    RTNParams,
    StuckSpec,
    rtn_multipliers,
)

MILLI = 1e-3
WINDOW = ConductanceWindow(0.1 * MILLI, 1.1 * MILLI)
DEVICE = DeviceModel(name="bench", on_off_ratio=11.0, g_off=0.1 * MILLI, bits=6)


def ideal_config(seed=0, scheme=None, r=0.0, stack=None, biasing="single"):
    return CrossbarConfig(
        scheme=scheme or MappingScheme.differential_pair(WINDOW, 1.0, k_v=0.2),
        device=DEVICE,
        stack=stack or NonidealityStack.ideal(),
        interconnect=LineResistanceParams(r, r, biasing),
        seed=seed,
    )


def report(criterion, detail):
    print(f"ACCEPTANCE {criterion}: PASS - {detail}")


def test_c01_ideal_limit_equivalence():
    start = time.perf_counter()
    worst = 0.0
    for case in range(100):
        stream = seeded_stream(case, "c1")
        m = int(stream.integers(1, 65))
        n = int(stream.integers(1, 65))
        w = stream.uniform(-1.0, 1.0, size=(m, n))
        x = stream.uniform(-1.0, 1.0, size=m)
        xbar = program(w, ideal_config(seed=case))
        y = vmm(xbar, x, ReadConfig())
        ref = matvec_ref(x, w)
        rel = np.abs(y - ref) / (1.0 + np.abs(ref))
        worst = max(worst, float(rel.max()))
        assert rel.max() <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report("C1", f"100 cases up to 64x64, worst rel err {worst:.2e}, {elapsed:.2f}s")


def test_c02_interconnect_oracle():
    start = time.perf_counter()
    res = solve_crossbar([[1.0 * MILLI]], [1.0], LineResistanceParams(50.0, 50.0))
    analytic = 1.0 / (1.0 / (1.0 * MILLI) + 50.0 + 50.0)
    assert abs(res.i_out[0] - analytic) <= 1e-12 * abs(analytic)
    worst = 0.0
    for case in range(20):
        stream = seeded_stream(case, "c2")
        m = n = 2 if case % 2 == 0 else 3
        g = stream.uniform(0.1 * MILLI, 1.1 * MILLI, size=(m, n))
        v = stream.uniform(-0.2, 0.2, size=m)
        got = solve_crossbar(g, v, LineResistanceParams(7.0, 11.0)).i_out
        want = dense_crossbar_solve(g, v, 7.0, 11.0)
        rel = np.abs(got - want) / (1.0 + np.abs(want))
        worst = max(worst, float(rel.max()))
        assert rel.max() <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report("C2", f"20 dense-oracle instances worst rel err {worst:.2e}; 1x1 analytic ok")


def test_c03_monotone_ir_drop():
    start = time.perf_counter()
    r_values = (0.0, 1.0, 2.0, 5.0, 10.0)
    sums = np.zeros(len(r_values))
    for seed in range(10):
        stream = seeded_stream(seed, "c3")
        w = stream.uniform(-1.0, 1.0, size=(16, 16))
        inputs = stream.uniform(-1.0, 1.0, size=(10, 16))
        ref = inputs @ w
        for ri, r in enumerate(r_values):
            xbar = program(w, ideal_config(seed=seed, r=r))
            y = vmm_batch(xbar, inputs, ReadConfig())
            sums[ri] += np.abs(y - ref).mean()
    means = sums / 10.0
    assert all(a <= b + 1e-15 for a, b in zip(means, means[1:]))
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    report(
        "C3",
        "mean |y - y_ideal| over R in {0,1,2,5,10} ohms: "
        + ", ".join(f"{m:.3e}" for m in means)
        + f" ({elapsed:.1f}s)",
    )


def test_c04_differential_pair_algebra():
    scheme = MappingScheme.differential_pair(WINDOW, 1.0, k_v=0.2)
    stream = seeded_stream(4, "c4")
    w = stream.uniform(-1.0, 1.0, size=(12, 9))
    g_plus, g_minus = weights_to_diff_pair(w, scheme)
    assert np.all(g_plus + g_minus == 2.0 * scheme.window.g_avg)
    worst = 0.0
    for case in range(100):
        s = seeded_stream(case, "c4-roundtrip")
        m, n = int(s.integers(2, 12)), int(s.integers(2, 12))
        w = s.uniform(-1.0, 1.0, size=(m, n))
        x = s.uniform(-1.0, 1.0, size=m)
        v = encode_inputs(x, scheme.scaling)
        gp, gm = weights_to_diff_pair(w, scheme)
        y = decode_outputs(v @ gp, v @ gm, scheme.scaling)
        ref = matvec_ref(x, w)
        rel = np.abs(y - ref) / (1.0 + np.abs(ref))
        worst = max(worst, float(rel.max()))
        assert rel.max() <= 1e-12
    bad = np.zeros((3, 3))
    bad[1, 2] = 1.0001
    with pytest.raises(RangeError, match=r"\(1, 2\)"):
        weights_to_diff_pair(bad, scheme)
    report("C4", f"pair sum exact, round trip worst rel err {worst:.2e}, range error indexed")


def test_c05_gradient_correctness():
    net = init_mlp([6, 5, 4], ["logistic", "softmax"], RandomStream(5, "c5"))
    stream = seeded_stream(5, "c5-data")
    x = stream.uniform(0.0, 1.0, size=(10, 6))
    labels = stream.integers(0, 4, size=10)
    targets = one_hot(labels, 4)
    analytic = gradients(net, x, targets, "cross_entropy")

    shapes = [l.w.shape for l in net.layers]
    sizes = [int(np.prod(s)) for s in shapes]

    def unpack(flat):
        out, pos = [], 0
        for shape, size in zip(shapes, sizes):
            out.append(flat[pos : pos + size].reshape(shape))
            pos += size
        return out

    def f(flat):
        from xbarsim.nn import DenseLayer, _forward_batch, _loss_value

        probe = Mlp([DenseLayer(w, l.activation) for w, l in zip(unpack(flat), net.layers)])
        _, acts = _forward_batch(probe, x)
        return _loss_value(acts[-1], targets, "cross_entropy")

    flat0 = np.concatenate([l.w.ravel() for l in net.layers])
    numeric = unpack(finite_diff_grad(f, flat0, 1e-5))
    worst = 0.0
    for a, nmat in zip(analytic, numeric):
        rel = np.abs(a - nmat) / (np.abs(a) + np.abs(nmat) + 1e-8)
        worst = max(worst, float(rel.max()))
        assert rel.max() <= 1e-4

    smap = sensitivity(net, (x, labels), 0.37)
    grads = gradients(net, x, targets, "cross_entropy")
    for m, g in zip(smap, grads):
        assert np.array_equal(m, -0.37 * g)
    report("C5", f"all {sum(sizes)} parameters, worst rel err {worst:.2e}; map = -eta*grad bitwise")


def test_c06_rtn_stationarity_and_averaging():
    start = time.perf_counter()
    params = RTNParams(delta=0.5, tau_high=2.0, tau_low=8.0)
    mult = rtn_multipliers(params, 10**5, seeded_stream(6, "c6"))
    frac = float(np.mean(mult > 1.0))
    assert abs(frac - 0.2) <= 0.02

    stack = NonidealityStack(rtn=RTNParams(delta=0.2, tau_high=2.0, tau_low=2.0))
    stream = seeded_stream(6, "c6-read")
    w = stream.uniform(-1.0, 1.0, size=(4, 3))
    x = stream.uniform(-1.0, 1.0, size=4)
    xbar = program(w, ideal_config(seed=6, stack=stack))
    reads1 = np.array([vmm(xbar, x, ReadConfig(n_avg=1), call_index=i) for i in range(200)])
    reads16 = np.array([vmm(xbar, x, ReadConfig(n_avg=16), call_index=i) for i in range(200)])
    var1 = reads1.var(axis=0).mean()
    var16 = reads16.var(axis=0).mean()
    assert var1 > 0.0
    assert var16 <= 1.5 / 16.0 * var1
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    report(
        "C6",
        f"high fraction {frac:.3f} (target 0.2 +/- 0.02); var ratio "
        f"{var16 / var1:.4f} <= {1.5 / 16:.4f} ({elapsed:.1f}s)",
    )


def test_c07_stuck_compensation():
    improved = 0
    for seed in range(10):
        stream = seeded_stream(seed, "c7")
        w = stream.uniform(-1.0, 1.0, size=(16, 16))
        stack = NonidealityStack(stuck=StuckSpec(0.05, "at_random_level"))
        xbar = program(w, ideal_config(seed=seed, stack=stack))
        before = weight_errors(xbar, w)
        fixed, _ = compensate_stuck(xbar, w)
        after = weight_errors(fixed, w)
        assert np.all(after <= before + 1e-15)  # deterministic non-increase
        if after.mean() < before.mean():
            improved += 1
    assert improved == 10
    report("C7", "per-cell error never increased; mean error strictly fell on 10/10 seeds")


def test_c08_pulse_width_encoding():
    stack = NonidealityStack(iv=IVNonlinearityParam(gamma=2.0, v_read=0.2))
    worst = 0.0
    for seed in range(5):
        stream = seeded_stream(seed, "c8")
        w = stream.uniform(-1.0, 1.0, size=(8, 6))
        x = stream.uniform(-1.0, 1.0, size=8)
        curved = program(w, ideal_config(seed=seed, stack=stack))
        y_pw = vmm(curved, x, ReadConfig(encoding="pulse_width", pulse_slots=None))
        linear = program(w, ideal_config(seed=seed))
        y_amp = vmm(linear, x, ReadConfig())
        rel = np.abs(y_pw - y_amp) / (1.0 + np.abs(y_amp))
        worst = max(worst, float(rel.max()))
        assert rel.max() <= 1e-9
    report("C8", f"gamma=2 pulse-width vs gamma=0 amplitude, worst rel err {worst:.2e}")


def _ratio3_factory(device, seed):
    window = ConductanceWindow(device.g_off, device.g_on)

    def factory(li, w):
        w_max = max(float(np.abs(w).max()), 1e-12)
        return CrossbarConfig(
            scheme=MappingScheme.differential_pair(window, w_max, k_v=0.2),
            device=device,
            stack=NonidealityStack.ideal(),
            interconnect=LineResistanceParams(),
            seed=seed,
            stream_id=f"layer-{li}",
        )

    return factory


def test_c09_on_off_ratio_three():
    start = time.perf_counter()
    x_tr, y_tr, x_te, y_te = synthetic_digits()
    device = preset("RRAM").replace(on_off_ratio=3.0)
    gaps = []
    for seed in range(10):
        net = init_mlp([64, 16, 10], ["logistic", "softmax"], RandomStream(seed, "c9"))
        cfg = TrainConfig(eta=0.5, epochs=30, batch_size=32, seed=seed)
        trained, _ = train_sgd(net, (x_tr, y_tr), cfg)
        train_acc, _ = evaluate(trained, x_tr, y_tr)
        assert train_acc >= 0.90
        backend = CrossbarMlpBackend.program_network(
            trained, _ratio3_factory(device, seed), ReadConfig()
        )
        exact_acc, _ = evaluate(trained, x_te, y_te)
        xbar_acc, _ = evaluate(trained, x_te, y_te, backend=backend)
        gaps.append(exact_acc - xbar_acc)
    mean_gap = float(np.mean(gaps))
    assert mean_gap <= 0.02
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    report("C9", f"mean accuracy gap at on/off ratio 3: {mean_gap * 100:.2f} pp ({elapsed:.1f}s)")


def test_c10_noise_injection_benefit():
    start = time.perf_counter()
    x_tr, y_tr, x_te, y_te = synthetic_digits()
    device = preset("RRAM")
    window = ConductanceWindow(device.g_off, device.g_on)
    stack = NonidealityStack(d2d=D2DSpec(0.25), stuck=StuckSpec(0.02, "at_G_off"))

    def factory(seed):
        def f(li, w):
            w_max = max(float(np.abs(w).max()), 1e-12)
            return CrossbarConfig(
                scheme=MappingScheme.differential_pair(window, w_max, k_v=0.2),
                device=device,
                stack=stack,
                interconnect=LineResistanceParams(),
                seed=seed,
                stream_id=f"layer-{li}",
            )

        return f

    accs = {"none": [], "agnostic": []}
    for mode, sigma_w in (("none", 0.0), ("agnostic", 0.2)):
        for seed in range(10):
            net = init_mlp([64, 16, 10], ["logistic", "softmax"], RandomStream(seed, "c10"))
            cfg = TrainConfig(
                eta=0.5, epochs=30, batch_size=32, seed=seed,
                noise_mode=mode, sigma_w=sigma_w,
            )
            trained, _ = train_sgd(net, (x_tr, y_tr), cfg)
            backend = CrossbarMlpBackend.program_network(
                trained, factory(7 * seed + 1), ReadConfig()
            )
            acc, _ = evaluate(trained, x_te, y_te, backend=backend)
            accs[mode].append(acc)
    clean = float(np.mean(accs["none"]))
    noisy = float(np.mean(accs["agnostic"]))
    margin = noisy - clean
    assert noisy >= clean
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    report(
        "C10",
        f"crossbar accuracy clean-trained {clean:.3f} vs noise-trained {noisy:.3f}, "
        f"margin +{margin * 100:.2f} pp ({elapsed:.1f}s)",
    )


SWEEP_CONFIG = """
seed: 17
repetitions: 2
dataset: {train_samples: 80, test_samples: 40, eval_limit: 10}
network: {layer_sizes: [64, 6, 10], activations: [logistic, softmax]}
sweep:
  path: interconnect.r_line
  values: [0.0, 2.0, 5.0]
"""


def test_c11_cli_determinism(tmp_path):
    config_path = tmp_path / "exp.yaml"
    config_path.write_text(SWEEP_CONFIG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli_main(["sweep", "--config", str(config_path), "--out", str(out_a)]) == 0
    assert cli_main(["sweep", "--config", str(config_path), "--out", str(out_b)]) == 0
    bytes_a = (out_a / "results.csv").read_bytes()
    bytes_b = (out_b / "results.csv").read_bytes()
    assert bytes_a == bytes_b

    cfg, issues = parse_config_text(SWEEP_CONFIG)
    assert not issues
    again, issues2 = parse_config_text(serialize_config(cfg))
    assert not issues2 and again == cfg
    report("C11", f"byte-identical results.csv ({len(bytes_a)} bytes); config round-trip equal")
