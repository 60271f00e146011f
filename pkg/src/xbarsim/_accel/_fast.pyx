# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled scalar-loop kernels; bit-compatible with xbarsim._accel.reference."""

from libc.math cimport fabs
from libc.stdint cimport int64_t

import numpy as np

NAME = "cython"


def program_pulses_batch(g_start, g_target, double g_off, double g_on,
                         double alpha, bint linear, long max_pulses):
    g_start_arr = np.ascontiguousarray(g_start, dtype=np.float64)
    g_target_arr = np.ascontiguousarray(g_target, dtype=np.float64)
    out = np.empty(g_start_arr.shape, dtype=np.float64)
    counts = np.zeros(g_start_arr.shape, dtype=np.int64)

    cdef double[::1] gs = g_start_arr.ravel()
    cdef double[::1] gt = g_target_arr.ravel()
    cdef double[::1] gv = out.ravel()
    cdef int64_t[::1] cv = counts.ravel()
    cdef Py_ssize_t n = gs.shape[0]
    cdef double span_step = alpha * (g_on - g_off)
    cdef double g, target, step, diff
    cdef Py_ssize_t i
    cdef long k
    for i in range(n):
        g = gs[i]
        target = gt[i]
        k = 0
        while k < max_pulses:
            diff = target - g
            if diff > 0.0:
                step = span_step if linear else alpha * (g_on - g)
            elif diff < 0.0:
                step = -span_step if linear else -(alpha * (g - g_off))
            else:
                break
            if fabs(diff) <= 0.5 * fabs(step):
                break
            g = g + step
            if g < g_off:
                g = g_off
            if g > g_on:
                g = g_on
            k += 1
        gv[i] = g
        cv[i] = k
    return out, counts


def rtn_states(u_init, u_step, double p_exit_high, double p_exit_low, double p_high):
    u_init_arr = np.ascontiguousarray(u_init, dtype=np.float64)
    u_step_arr = np.ascontiguousarray(u_step, dtype=np.float64)

    cdef double[::1] ui = u_init_arr
    cdef double[:, ::1] us = u_step_arr
    cdef Py_ssize_t cells = ui.shape[0]
    cdef Py_ssize_t n_steps = us.shape[0]
    out = np.empty((n_steps + 1, cells), dtype=np.int8)
    cdef signed char[:, ::1] ov = out
    cdef Py_ssize_t t, c
    cdef signed char s
    for c in range(cells):
        ov[0, c] = 1 if ui[c] < p_high else 0
    for t in range(n_steps):
        for c in range(cells):
            s = ov[t, c]
            if us[t, c] < (p_exit_high if s == 1 else p_exit_low):
                s = <signed char>(1 - s)
            ov[t + 1, c] = s
    return out
