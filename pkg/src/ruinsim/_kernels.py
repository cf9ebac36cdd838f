"""Compiled per-path kernels.

Everything here takes a ``numpy.random.Generator`` (one Philox stream per
path) plus flat parameter arrays built by :class:`ruinsim.cycles.CycleSpec`.
Draw order inside a cycle is fixed: interarrival time, jump count, jump
times, jump sizes, Brownian increments (node order), claim size.
"""

import math

import numpy as np
from numba import njit

# cfg layout
DRIFT = 0
SIGMA = 1
LAM = 2
JUMP_CODE = 3
IA_CODE = 4
IA_P0 = 5
IA_P1 = 6
CL_CODE = 7
CL_P0 = 8
CL_P1 = 9
PREMIUM = 10
RESOLUTION = 11
BASE_STEP = 12
REFINE = 13
MODE = 14
CFG_SIZE = 15

MODE_AUTO = 0
MODE_GRID = 1
MODE_EXACT = 2

# cycle output layout
OUT_M = 0
OUT_Q = 1
OUT_T = 2
OUT_V = 3
OUT_INTEGRAL = 4
OUT_CLAIM = 5
OUT_SUP = 6
OUT_JUMPS = 7
OUT_SIZE = 8

V_LIMIT = 700.0
SERIES_CUTOFF = 1e-8


@njit(cache=True)
def draw_interarrival(gen, code, p0, p1):
    if code == 0:
        return gen.exponential(1.0 / p0)
    elif code == 1:
        return gen.gamma(p0, 1.0 / p1)
    elif code == 2:
        return p0
    return gen.uniform(p0, p1)


@njit(cache=True)
def draw_claim(gen, code, p0, p1):
    if code == 0:
        return gen.exponential(1.0 / p0)
    elif code == 1:
        return p0 * (1.0 + gen.pareto(p1))
    elif code == 2:
        return gen.lognormal(p0, p1)
    return gen.uniform(p0, p1)


@njit(cache=True)
def draw_log_jump(gen, code, jp):
    if code == 1:
        n = int(jp[0])
        u = gen.random()
        for i in range(n):
            if u < jp[1 + n + i]:
                return jp[1 + i]
        return jp[n]
    elif code == 2:
        return math.log1p(jp[0] + (jp[1] - jp[0]) * gen.random())
    # double exponential on the log scale
    if gen.random() < jp[2]:
        return gen.exponential(1.0 / jp[0])
    return -gen.exponential(1.0 / jp[1])


@njit(cache=True)
def segment_integral(v0, slope, d):
    """int_0^d exp(-(v0 + slope r)) dr."""
    x = slope * d
    if abs(x) < SERIES_CUTOFF:
        phi = 1.0 - 0.5 * x
    else:
        phi = -math.expm1(-x) / x
    return math.exp(-v0) * d * phi


@njit(cache=True)
def exact_integral(t_len, times, sizes, slope):
    """Exact discounted integral for a piecewise-linear log price.

    Returns (integral, v_end, sup of exp(-V), saturated).
    """
    v = 0.0
    t = 0.0
    total = 0.0
    sup = 1.0
    for j in range(times.shape[0]):
        d = times[j] - t
        total += segment_integral(v, slope, d)
        v_left = v + slope * d
        v = v_left + sizes[j]
        if abs(v_left) > V_LIMIT or abs(v) > V_LIMIT:
            return np.nan, np.nan, np.nan, True
        sup = max(sup, math.exp(-v_left), math.exp(-v))
        t = times[j]
    d = t_len - t
    total += segment_integral(v, slope, d)
    v_end = v + slope * d
    if abs(v_end) > V_LIMIT:
        return np.nan, np.nan, np.nan, True
    sup = max(sup, math.exp(-v_end))
    return total, v_end, sup, False


@njit(cache=True)
def grid_integral(gen, t_len, times, sizes, slope, sigma, step):
    """Trapezoid of exp(-V) over a grid of spacing ``step`` with the jump
    times inserted as nodes; node values are left limits ``V(t-)``.

    Brownian increments are drawn only when ``sigma > 0``.
    Returns (integral, v_end, sup of exp(-V), saturated).
    """
    v = 0.0
    t = 0.0
    f_prev = 1.0
    total = 0.0
    sup = 1.0
    j = 0
    k = 1
    n_jumps = times.shape[0]
    while True:
        t_grid = k * step
        t_jump = times[j] if j < n_jumps else np.inf
        t_next = min(t_grid, t_jump, t_len)
        dt = t_next - t
        v_left = v + slope * dt
        if sigma > 0.0 and dt > 0.0:
            v_left += sigma * math.sqrt(dt) * gen.standard_normal()
        if abs(v_left) > V_LIMIT:
            return np.nan, np.nan, np.nan, True
        f = math.exp(-v_left)
        total += 0.5 * dt * (f_prev + f)
        if f > sup:
            sup = f
        f_prev = f
        t = t_next
        if t_next >= t_len:
            return total, v_left, sup, False
        if t_next == t_jump:
            v = v_left + sizes[j]
            j += 1
            if abs(v) > V_LIMIT:
                return np.nan, np.nan, np.nan, True
            sup = max(sup, math.exp(-v))
            if t_grid <= t_next:
                k += 1
        else:
            v = v_left
            k += 1


@njit(cache=True)
def simulate_cycle(gen, cfg, jp, out):
    """One renewal cycle; fills ``out`` and returns the saturation flag."""
    t_len = draw_interarrival(gen, int(cfg[IA_CODE]), cfg[IA_P0], cfg[IA_P1])
    lam = cfg[LAM]
    n = 0
    if lam > 0.0:
        n = gen.poisson(lam * t_len)
    times = np.empty(n)
    sizes = np.empty(n)
    for i in range(n):
        times[i] = t_len * gen.random()
    times.sort()
    code = int(cfg[JUMP_CODE])
    for i in range(n):
        sizes[i] = draw_log_jump(gen, code, jp)

    slope = cfg[DRIFT]
    sigma = cfg[SIGMA]
    mode = int(cfg[MODE])
    if t_len <= 0.0:
        integral, v_end, sup, sat = 0.0, 0.0, 1.0, False
    elif mode == MODE_GRID or (mode == MODE_AUTO and sigma > 0.0):
        base = cfg[BASE_STEP]
        if base <= 0.0:
            base = min(t_len, 1.0) / cfg[RESOLUTION]
        step = base / 2.0 ** cfg[REFINE]
        integral, v_end, sup, sat = grid_integral(gen, t_len, times, sizes, slope, sigma, step)
    else:
        integral, v_end, sup, sat = exact_integral(t_len, times, sizes, slope)

    claim = draw_claim(gen, int(cfg[CL_CODE]), cfg[CL_P0], cfg[CL_P1])
    if sat:
        for i in range(OUT_SIZE):
            out[i] = np.nan
        out[OUT_T] = t_len
        out[OUT_JUMPS] = n
        return True
    m = math.exp(-v_end)
    out[OUT_M] = m
    out[OUT_Q] = m * claim - cfg[PREMIUM] * integral
    out[OUT_T] = t_len
    out[OUT_V] = v_end
    out[OUT_INTEGRAL] = integral
    out[OUT_CLAIM] = claim
    out[OUT_SUP] = sup
    out[OUT_JUMPS] = n
    return False


@njit(cache=True)
def cycle_path(gen, cfg, jp, out):
    return simulate_cycle(gen, cfg, jp, out)


@njit(cache=True)
def perpetuity_path(gen, cfg, jp, delta_a, n_max, skip, buf):
    """Truncated perpetuity sum_n A_n Q_{n+1}, optionally after discarding
    ``skip`` cycles.  Returns (y, n, a, flagged, saturated); y is nan on
    saturation."""
    for _ in range(skip):
        if simulate_cycle(gen, cfg, jp, buf):
            return np.nan, 0, np.nan, True, True
    y = 0.0
    a = 1.0
    n = 0
    while True:
        if simulate_cycle(gen, cfg, jp, buf):
            return np.nan, n, a, True, True
        y += a * buf[OUT_Q]
        a *= buf[OUT_M]
        n += 1
        if a <= delta_a:
            return y, n, a, False, False
        if not a < 1e300:
            return np.nan, n, a, True, True
        if n >= n_max:
            return y, n, a, True, False


@njit(cache=True)
def direct_path(gen, cfg, jp, a_floor, n_max, buf):
    """Run Y_n until A_n < a_floor or n_max.

    Returns (running max of Y_n, final Y_n, final A_n, n, stop code) with
    stop code 0 = discount floor, 1 = horizon n_max, 2 = saturation.
    """
    y = 0.0
    a = 1.0
    n = 0
    y_max = -np.inf
    while True:
        if simulate_cycle(gen, cfg, jp, buf):
            return y_max, y, a, n, 2
        y += a * buf[OUT_Q]
        a *= buf[OUT_M]
        n += 1
        if y > y_max:
            y_max = y
        if a < a_floor:
            return y_max, y, a, n, 0
        if not a < 1e300:
            return y_max, y, a, n, 2
        if n >= n_max:
            return y_max, y, a, n, 1


@njit(cache=True)
def horizon_path(gen, cfg, jp, u, t_max, buf):
    """First claim epoch T_n <= t_max with Y_n >= u; inf if none, nan on
    saturation."""
    y = 0.0
    a = 1.0
    t = 0.0
    while True:
        if simulate_cycle(gen, cfg, jp, buf):
            return np.nan
        t += buf[OUT_T]
        if t > t_max:
            return np.inf
        y += a * buf[OUT_Q]
        a *= buf[OUT_M]
        if y >= u:
            return t
        if not a < 1e300:
            return np.nan
