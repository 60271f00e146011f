#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Covers the two scalar-loop kernels behind programming and telegraph-noise
reads, plus an end-to-end crossbar programming call so the kernel speedup is
seen in context. Both backends produce bit-identical results; this only
measures time.
"""

import argparse
import time

import numpy as np

from xbarsim._accel import reference

try:
    from xbarsim._accel import _fast
except ImportError:
    _fast = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_pulses(backend, repeats):
    rng = np.random.default_rng(0)
    cells = 256 * 256 * 2
    g_start = np.full(cells, 1.0)
    g_target = rng.uniform(1.0, 2.0, size=cells)
    return timeit(
        lambda: backend.program_pulses_batch(g_start, g_target, 1.0, 2.0, 0.05, False, 400),
        repeats,
    )


def bench_rtn_long(backend, repeats):
    rng = np.random.default_rng(1)
    u_init = rng.uniform(size=8)
    u_step = rng.uniform(size=(100_000, 8))
    return timeit(lambda: backend.rtn_states(u_init, u_step, 0.5, 0.125, 0.2), repeats)


def bench_rtn_wide(backend, repeats):
    rng = np.random.default_rng(2)
    cells = 128 * 128
    u_init = rng.uniform(size=cells)
    u_step = rng.uniform(size=(16, cells))
    return timeit(lambda: backend.rtn_states(u_init, u_step, 0.5, 0.5, 0.5), repeats)


def bench_program_crossbar(repeats):
    """End-to-end programming with pulse stage enabled (uses the active backend)."""
    from xbarsim.crossbar import CrossbarConfig, program
    from xbarsim.devices import preset
    from xbarsim.interconnect import LineResistanceParams
    from xbarsim.mapping import ConductanceWindow, MappingScheme
    from xbarsim.nonidealities import NonidealityStack, PulseProgramming

    device = preset("RRAM")
    window = ConductanceWindow(device.g_off, device.g_on)
    config = CrossbarConfig(
        scheme=MappingScheme.differential_pair(window, 1.0, k_v=0.2),
        device=device,
        stack=NonidealityStack(pulses=PulseProgramming(max_pulses=200)),
        interconnect=LineResistanceParams(),
        seed=0,
    )
    w = np.random.default_rng(3).uniform(-1, 1, size=(128, 128))
    return timeit(lambda: program(w, config), repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    benches = [
        ("pulse programming, 131k cells", bench_pulses),
        ("telegraph chains, 100k reads x 8 cells", bench_rtn_long),
        ("telegraph chains, 16 reads x 16k cells", bench_rtn_wide),
    ]
    print(f"{'kernel':<42}{'python':>10}{'cython':>10}{'speedup':>9}")
    for name, bench in benches:
        t_py = bench(reference, args.repeats)
        if _fast is not None:
            t_cy = bench(_fast, args.repeats)
            print(f"{name:<42}{t_py * 1e3:>8.1f}ms{t_cy * 1e3:>8.1f}ms{t_py / t_cy:>8.1f}x")
        else:
            print(f"{name:<42}{t_py * 1e3:>8.1f}ms{'n/a':>10}{'':>9}")

    t_e2e = bench_program_crossbar(args.repeats)
    from xbarsim._accel import BACKEND

    print(f"\nprogram 128x128 crossbar, pulse stage on ({BACKEND} backend): {t_e2e * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
