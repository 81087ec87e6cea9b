"""Compiled path-simulation kernels.

Every random draw is a pure function of ``(seed, path, counter)`` through a
splitmix64 hash, so a path's trajectory does not depend on which other paths
are simulated, in which order, or in how many chunks.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MUL1 = np.uint64(0xBF58476D1CE4E5B9)
MUL2 = np.uint64(0x94D049BB133111EB)
INV_2_53 = 1.0 / 9007199254740992.0

# discounting codes
DISC_CONSTANT = 0
DISC_OCCUPATION = 1
DISC_LOCAL_TIME = 2

# model codes
MODEL_JUMP_DIFFUSION = 0
MODEL_STABLE = 1


@njit(cache=True)
def splitmix64(x):
    z = x + GOLDEN
    z = (z ^ (z >> np.uint64(30))) * MUL1
    z = (z ^ (z >> np.uint64(27))) * MUL2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def path_key(seed, path):
    return splitmix64(np.uint64(seed) ^ splitmix64(np.uint64(path) * GOLDEN))


@njit(cache=True)
def uniform(key, counter):
    """Uniform on the open interval (0, 1)."""
    bits = splitmix64(key + np.uint64(counter) * GOLDEN) >> np.uint64(11)
    return (float(bits) + 0.5) * INV_2_53


@njit(cache=True)
def normal(key, counter):
    u1 = uniform(key, counter)
    u2 = uniform(key, counter + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True)
def stable_increment(key, counter, beta, scale):
    """Totally left-skewed beta-stable draw (Chambers-Mallows-Stuck)."""
    if beta == 2.0:
        return scale * math.sqrt(2.0) * normal(key, counter)
    v = math.pi * (uniform(key, counter) - 0.5)
    w = -math.log(uniform(key, counter + 1))
    t = -math.tan(math.pi * beta / 2.0)  # skewness -1
    b = math.atan(t) / beta
    s = (1.0 + t * t) ** (1.0 / (2.0 * beta))
    x = (
        s
        * math.sin(beta * (v + b))
        / math.cos(v) ** (1.0 / beta)
        * (math.cos(v - beta * (v + b)) / w) ** ((1.0 - beta) / beta)
    )
    return scale * x


@njit(cache=True)
def _rate(disc, r, q, eps, x):
    if disc == DISC_CONSTANT:
        return r
    if disc == DISC_OCCUPATION:
        return r + q if x < 0.0 else r
    return r / (2.0 * eps) if abs(x) < eps else 0.0


@njit(cache=True)
def killed_maximum(
    model_kind,
    mu,
    sigma,
    jump_rate,
    jump_decay,
    beta,
    disc,
    r,
    q,
    eps,
    x0,
    dt,
    horizon,
    seed,
    first_path,
    n_paths,
    antithetic,
    stop_level,
):
    """Running maximum of X up to the killing time zeta (or the horizon).

    Returns ``(xbar, truncated)`` per path.  ``truncated`` marks paths that
    reached the horizon before being killed.  A path is abandoned as soon as
    its maximum exceeds ``stop_level``, since nothing above that level is
    asked for.  Between grid nodes the diffusive part is bridged, so the
    maximum is exact in continuous time for Brownian motion with exactly
    timed downward jumps; stable paths are only inspected on the nodes.
    """
    xbar = np.empty(n_paths)
    truncated = np.zeros(n_paths, dtype=np.bool_)
    stable_scale_unit = 0.0
    if model_kind == MODEL_STABLE:
        stable_scale_unit = (-math.cos(math.pi * beta / 2.0)) ** (1.0 / beta) if beta < 2.0 else 1.0
    for i in range(n_paths):
        p = first_path + i
        sign = 1.0
        stream = p
        if antithetic:
            stream = p // 2
            if p % 2 == 1:
                sign = -1.0
        key = path_key(seed, stream)
        ctr = 0
        clock = -math.log(uniform(key, ctr))
        ctr += 1
        next_jump = math.inf
        if model_kind == MODEL_JUMP_DIFFUSION and jump_rate > 0.0:
            next_jump = -math.log(uniform(key, ctr)) / jump_rate
            ctr += 1
        x = x0
        m = x0
        a = 0.0
        t = 0.0
        killed = False
        while t < horizon:
            s = min(dt, horizon - t)
            jump_now = False
            if next_jump < t + s:
                s = next_jump - t
                jump_now = True
            rate = _rate(disc, r, q, eps, x)
            if rate > 0.0 and a + rate * s > clock:
                s = (clock - a) / rate
                killed = True
                jump_now = False
            if model_kind == MODEL_STABLE:
                inc = stable_increment(key, ctr, beta, stable_scale_unit * s ** (1.0 / beta))
                ctr += 2
                x_new = x + sign * inc
                top = x_new
            else:
                z = normal(key, ctr)
                ctr += 2
                x_new = x + mu * s + sign * sigma * math.sqrt(s) * z
                if sigma > 0.0:
                    u = uniform(key, ctr)
                    ctr += 1
                    d = x_new - x
                    top = 0.5 * (x + x_new + math.sqrt(d * d - 2.0 * sigma * sigma * s * math.log(u)))
                else:
                    top = max(x, x_new)
            if top > m:
                m = top
            a += rate * s
            t += s
            x = x_new
            if killed:
                break
            if m > stop_level:
                break
            if jump_now:
                x -= -math.log(uniform(key, ctr)) / jump_decay
                ctr += 1
                next_jump = t - math.log(uniform(key, ctr)) / jump_rate
                ctr += 1
        xbar[i] = m
        truncated[i] = not killed and m <= stop_level
    return xbar, truncated


@njit(cache=True)
def state_and_caf(
    model_kind,
    mu,
    sigma,
    jump_rate,
    jump_decay,
    beta,
    disc,
    r,
    q,
    eps,
    x0,
    dt,
    t_end,
    seed,
    first_path,
    n_paths,
    antithetic,
):
    """(X_t, A_t) at the fixed time t_end for each path, left-point CAF rule."""
    xs = np.empty(n_paths)
    acc = np.empty(n_paths)
    stable_scale_unit = 0.0
    if model_kind == MODEL_STABLE:
        stable_scale_unit = (-math.cos(math.pi * beta / 2.0)) ** (1.0 / beta) if beta < 2.0 else 1.0
    for i in range(n_paths):
        p = first_path + i
        sign = 1.0
        stream = p
        if antithetic:
            stream = p // 2
            if p % 2 == 1:
                sign = -1.0
        key = path_key(seed, stream)
        ctr = 1  # counter 0 is the killing clock of killed_maximum; keep streams aligned
        next_jump = math.inf
        if model_kind == MODEL_JUMP_DIFFUSION and jump_rate > 0.0:
            next_jump = -math.log(uniform(key, ctr)) / jump_rate
            ctr += 1
        x = x0
        a = 0.0
        t = 0.0
        while t < t_end:
            s = min(dt, t_end - t)
            jump_now = False
            if next_jump < t + s:
                s = next_jump - t
                jump_now = True
            a += _rate(disc, r, q, eps, x) * s
            if model_kind == MODEL_STABLE:
                x += sign * stable_increment(key, ctr, beta, stable_scale_unit * s ** (1.0 / beta))
                ctr += 2
            else:
                x += mu * s + sign * sigma * math.sqrt(s) * normal(key, ctr)
                ctr += 2
                if sigma > 0.0:
                    ctr += 1
            t += s
            if jump_now:
                x -= -math.log(uniform(key, ctr)) / jump_decay
                ctr += 1
                next_jump = t - math.log(uniform(key, ctr)) / jump_rate
                ctr += 1
        xs[i] = x
        acc[i] = a
    return xs, acc


@njit(cache=True)
def single_path(model_kind, mu, sigma, jump_rate, jump_decay, beta, dt, horizon, x0, seed, path):
    """Full trajectory of one path: times and states, jump epochs inserted.

    A jump epoch contributes two nodes with the same time: the pre-jump and
    the post-jump state.
    """
    key = path_key(seed, path)
    n_max = int(math.ceil(horizon / dt)) + 1
    cap = n_max * 2 + 16
    times = np.empty(cap)
    states = np.empty(cap)
    times[0] = 0.0
    states[0] = x0
    k = 1
    ctr = 1
    next_jump = math.inf
    if model_kind == MODEL_JUMP_DIFFUSION and jump_rate > 0.0:
        next_jump = -math.log(uniform(key, ctr)) / jump_rate
        ctr += 1
    stable_scale_unit = 0.0
    if model_kind == MODEL_STABLE:
        stable_scale_unit = (-math.cos(math.pi * beta / 2.0)) ** (1.0 / beta) if beta < 2.0 else 1.0
    x = x0
    t = 0.0
    while t < horizon - 1e-12 * horizon:
        s = min(dt, horizon - t)
        jump_now = False
        if next_jump < t + s:
            s = next_jump - t
            jump_now = True
        if model_kind == MODEL_STABLE:
            x += stable_increment(key, ctr, beta, stable_scale_unit * s ** (1.0 / beta))
            ctr += 2
        else:
            x += mu * s + sigma * math.sqrt(s) * normal(key, ctr)
            ctr += 2
            if sigma > 0.0:
                ctr += 1
        t += s
        if k + 2 >= cap:
            break
        times[k] = t
        states[k] = x
        k += 1
        if jump_now:
            x -= -math.log(uniform(key, ctr)) / jump_decay
            ctr += 1
            next_jump = t - math.log(uniform(key, ctr)) / jump_rate
            ctr += 1
            times[k] = t
            states[k] = x
            k += 1
    return times[:k], states[:k]
