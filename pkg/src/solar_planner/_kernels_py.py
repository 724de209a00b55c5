"""Pure-numpy path kernels; the fallback when the compiled extension is unavailable.

Random numbers come from a counter-based generator: path ``i`` of stream
``s`` owns the SplitMix64 sequence keyed by ``(seed, s, i)``, and draw ``n``
of that sequence is a pure function of the key and ``n``.  Results therefore
do not depend on how paths are chunked or distributed over threads.  Step
``j`` consumes draws ``3j`` and ``3j + 1`` (Box-Muller normal) and ``3j + 2``
(bridge-crossing uniform).  ``_kernels.pyx`` implements the same contract.
"""

from __future__ import annotations

import math

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
STREAM_MUL = 0xD1B54A32D192ED03
MASK = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi
_CHUNK = 1 << 16


def _mix(z):
    """SplitMix64 finalizer on a uint64 array."""
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _mix_int(x: int) -> int:
    z = (x + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def path_keys(seed: int, stream: int, first_path: int, n: int) -> np.ndarray:
    base = _mix_int((seed + stream * STREAM_MUL) & MASK)
    idx = np.arange(first_path, first_path + n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix((np.uint64(base) ^ (idx * np.uint64(GOLDEN))) + np.uint64(GOLDEN))


def _uniform(keys: np.ndarray, counter: int) -> np.ndarray:
    offset = np.uint64(((counter + 1) * GOLDEN) & MASK)
    with np.errstate(over="ignore"):
        bits = _mix(keys + offset)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def _normal(keys: np.ndarray, step: int) -> np.ndarray:
    u1 = _uniform(keys, 3 * step)
    u2 = _uniform(keys, 3 * step + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def uniforms(seed: int, stream: int, n: int, first_path: int = 0, counter: int = 0) -> np.ndarray:
    """Draw ``counter`` of each path's sequence, as uniforms in (0, 1)."""
    return _uniform(path_keys(seed, stream, first_path, n), counter)


def first_passage_steps(log_barrier, drift, sigma: float, dt: float, n_steps: int, seed: int,
                        bridge: bool = True, stream: int = 0, first_path: int = 0,
                        threads: int = 1) -> np.ndarray:
    """Step count at which each log-demand path first reaches its barrier.

    ``log_barrier[i]`` is ``log(x_bar / x0)`` and ``drift[i]`` the log-drift
    ``mu - sigma^2/2`` of path ``i``.  Returns ``0`` for paths starting at or
    above the barrier, ``k >= 1`` when the crossing falls in
    ``((k-1) dt, k dt]``, and ``-1`` when no crossing occurs within
    ``n_steps``.  With ``bridge`` set, a step whose endpoints both lie below
    the barrier still counts as a crossing with the Brownian-bridge
    probability ``exp(-2 d0 d1 / (sigma^2 dt))``.
    """
    log_barrier = np.ascontiguousarray(log_barrier, dtype=np.float64)
    drift = np.ascontiguousarray(drift, dtype=np.float64)
    n = log_barrier.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    sq = sigma * math.sqrt(dt)
    inv_var = 2.0 / (sigma * sigma * dt)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        keys = path_keys(seed, stream, first_path + start, stop - start)
        barrier = log_barrier[start:stop]
        step_drift = drift[start:stop] * dt
        res = np.full(stop - start, -1, dtype=np.int64)
        res[barrier <= 0.0] = 0
        active = np.nonzero(barrier > 0.0)[0]
        y = np.zeros(active.size)
        for j in range(n_steps):
            if active.size == 0:
                break
            k = keys[active]
            y_next = y + step_drift[active] + sq * _normal(k, j)
            d0 = barrier[active] - y
            d1 = barrier[active] - y_next
            hit = d1 <= 0.0
            if bridge:
                u = _uniform(k, 3 * j + 2)
                p = np.exp(-inv_var * d0 * np.maximum(d1, 0.0))
                hit |= u < p
            res[active[hit]] = j + 1
            keep = ~hit
            active = active[keep]
            y = y_next[keep]
        out[start:stop] = res
    return out


def asian_cycle_payoffs(x0: float, mu: float, sigma: float, t_b: float, steps_per_cycle: int,
                        n_cycles: int, c_rate: float, lam: float, n_paths: int, seed: int,
                        n_report: int = 0, stream: int = 2, first_path: int = 0,
                        threads: int = 1):
    """Discounted Asian call/put legs of the per-cycle billing, one value per path.

    Returns ``(call, put, averages)`` with
    ``call[i] = sum_n exp(-n lam t_b) t_b (avg_n - c_rate)^+`` and ``put``
    likewise for ``(c_rate - avg_n)^+``, where ``avg_n`` is the trapezoidal
    time average of demand over cycle ``n``; ``averages`` holds ``avg_n`` for
    the first ``n_report`` cycles.
    """
    dt = t_b / steps_per_cycle
    drift = (mu - 0.5 * sigma * sigma) * dt
    sq = sigma * math.sqrt(dt)
    call = np.zeros(n_paths)
    put = np.zeros(n_paths)
    averages = np.zeros((n_paths, n_report))
    for start in range(0, n_paths, _CHUNK):
        stop = min(n_paths, start + _CHUNK)
        keys = path_keys(seed, stream, first_path + start, stop - start)
        x = np.full(stop - start, float(x0))
        c_acc = np.zeros(stop - start)
        p_acc = np.zeros(stop - start)
        step = 0
        for cyc in range(1, n_cycles + 1):
            integral = np.zeros(stop - start)
            for _ in range(steps_per_cycle):
                x_next = x * np.exp(drift + sq * _normal(keys, step))
                integral += 0.5 * dt * (x + x_next)
                x = x_next
                step += 1
            avg = integral / t_b
            disc = math.exp(-cyc * lam * t_b) * t_b
            c_acc += disc * np.maximum(avg - c_rate, 0.0)
            p_acc += disc * np.maximum(c_rate - avg, 0.0)
            if cyc <= n_report:
                averages[start:stop, cyc - 1] = avg
        call[start:stop] = c_acc
        put[start:stop] = p_acc
    return call, put, averages
