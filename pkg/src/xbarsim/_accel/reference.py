"""Pure-numpy implementations of the scalar-loop kernels.

These are the fallback for `xbarsim._accel._fast` (the Cython extension) and
must stay bit-compatible with it: same arithmetic, same operation order.
Kernels take pre-drawn uniforms instead of RNG state so both backends are
deterministic given the same inputs.
"""

import numpy as np

NAME = "python"


def program_pulses_batch(g_start, g_target, g_off, g_on, alpha, linear, max_pulses):
    """Iterative pulse programming for a flat batch of cells.

    Potentiation steps are alpha*(g_on - g) and depression steps
    -alpha*(g - g_off); a linear device uses the constant step
    alpha*(g_on - g_off) in both directions. A cell stops once
    |g - target| <= |step|/2 (one more pulse would not help) or after
    max_pulses. Conductances never leave [g_off, g_on].

    Returns (g_final, pulses_used), both shaped like g_start.
    """
    g = np.array(g_start, dtype=np.float64, copy=True)
    target = np.asarray(g_target, dtype=np.float64)
    pulses = np.zeros(g.shape, dtype=np.int64)
    span_step = alpha * (g_on - g_off)
    for _ in range(int(max_pulses)):
        diff = target - g
        if linear:
            step = np.where(diff > 0.0, span_step, np.where(diff < 0.0, -span_step, 0.0))
        else:
            step = np.where(
                diff > 0.0,
                alpha * (g_on - g),
                np.where(diff < 0.0, -(alpha * (g - g_off)), 0.0),
            )
        fire = np.abs(diff) > 0.5 * np.abs(step)
        if not fire.any():
            break
        g = np.where(fire, np.minimum(g_on, np.maximum(g_off, g + step)), g)
        pulses = pulses + fire
    return g, pulses


def rtn_states(u_init, u_step, p_exit_high, p_exit_low, p_high):
    """Two-state telegraph-noise chains for a batch of cells.

    u_init: (cells,) uniforms choosing the initial state from the stationary
    distribution (high with probability p_high). u_step: (reads-1, cells)
    uniforms driving per-read transitions; a chain in the high state exits
    with probability p_exit_high, in the low state with p_exit_low.

    Returns an int8 array (reads, cells); 1 marks the high state.
    """
    u_init = np.asarray(u_init, dtype=np.float64)
    u_step = np.asarray(u_step, dtype=np.float64)
    n_steps = u_step.shape[0]
    out = np.empty((n_steps + 1, u_init.shape[0]), dtype=np.int8)
    state = (u_init < p_high).astype(np.int8)
    out[0] = state
    for t in range(n_steps):
        p_exit = np.where(state == 1, p_exit_high, p_exit_low)
        flip = u_step[t] < p_exit
        state = np.where(flip, 1 - state, state).astype(np.int8)
        out[t + 1] = state
    return out
