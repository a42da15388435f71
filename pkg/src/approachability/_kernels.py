"""Compiled inner loops: chain stepping, harmonic clock and hold schedule."""

from __future__ import annotations

import numpy as np
from numba import njit

REACHED_END = 0
HIT_STOP_STATE = 1
LEFT_TARGET = 2
BUFFER_EMPTY = 3


@njit(cache=True)
def rescaled_times(n_max):
    """t[n] = sum_{i<=n} 1/i for n = 0..n_max, Kahan-compensated."""
    t = np.zeros(n_max + 1)
    total = 0.0
    comp = 0.0
    for i in range(1, n_max + 1):
        y = 1.0 / i - comp
        s = total + y
        comp = (s - total) - y
        total = s
        t[i] = total
    return t


@njit(cache=True)
def next_switch_step(start, hold):
    """Smallest m with sum_{i=start}^{m-1} 1/i > hold (compensated sum)."""
    total = 0.0
    comp = 0.0
    i = start
    while True:
        y = 1.0 / i - comp
        s = total + y
        comp = (s - total) - y
        total = s
        i += 1
        if total > hold:
            return i


@njit(cache=True)
def _sample(cum, u):
    for k in range(cum.shape[0] - 1):
        if u < cum[k]:
            return k
    return cum.shape[0] - 1


@njit(cache=True)
def _strictly_inside(x, cons_a, cons_b, center, radius):
    for i in range(cons_a.shape[0]):
        acc = 0.0
        for k in range(x.shape[0]):
            acc += cons_a[i, k] * x[k]
        if acc > cons_b[i]:
            return False
    if radius < np.inf:
        acc = 0.0
        for k in range(x.shape[0]):
            diff = x[k] - center[k]
            acc += diff * diff
        if acc > radius * radius:
            return False
    return True


@njit(cache=True)
def advance(
    n, n_end, seg_start, theta, stop_state, inside_mode,
    xs, states, ups, uas,
    cum_p, cum_a, cum_k, reward,
    cons_a, cons_b, center, radius,
    buf, pos,
):
    """Step the closed loop with fixed strategies from ``n`` toward ``n_end``.

    Draws three uniforms per step in the order player, adversary, transition.
    Stops early when the chain re-enters ``stop_state`` (if >= 0) or, in
    ``inside_mode``, when the running average stops satisfying the target's
    constraints exactly.  Returns ``(n, theta, pos, reason)``.
    """
    d = xs.shape[1]
    while n < n_end:
        if n > seg_start:
            if stop_state >= 0 and theta == stop_state:
                return n, theta, pos, HIT_STOP_STATE
            if inside_mode and not _strictly_inside(xs[n], cons_a, cons_b, center, radius):
                return n, theta, pos, LEFT_TARGET
        if pos + 3 > buf.shape[0]:
            return n, theta, pos, BUFFER_EMPTY
        up = _sample(cum_p[theta], buf[pos])
        ua = _sample(cum_a[theta], buf[pos + 1])
        nxt = _sample(cum_k[theta, up, ua], buf[pos + 2])
        pos += 3
        states[n] = theta
        ups[n] = up
        uas[n] = ua
        for k in range(d):
            xs[n + 1, k] = xs[n, k] + (reward[theta, up, ua, k] - xs[n, k]) / (n + 1)
        theta = nxt
        n += 1
    return n, theta, pos, REACHED_END


@njit(cache=True)
def simulate_chain(matrix_cum, steps, theta, buf):
    """State visit counts of a Markov chain given cumulative transition rows."""
    counts = np.zeros(matrix_cum.shape[0], dtype=np.int64)
    for n in range(steps):
        counts[theta] += 1
        theta = _sample(matrix_cum[theta], buf[n])
    return counts
