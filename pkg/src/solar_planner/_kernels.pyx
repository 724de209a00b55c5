# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path kernels.  Same random-number contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, log, sqrt, cos, M_PI
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t STREAM_MUL = 0xD1B54A32D192ED03ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _base(uint64_t seed, uint64_t stream) noexcept nogil:
    return _mix(seed + stream * STREAM_MUL + GOLDEN)


cdef inline uint64_t _key(uint64_t base, uint64_t path) noexcept nogil:
    return _mix((base ^ (path * GOLDEN)) + GOLDEN)


cdef inline double _uniform(uint64_t key, uint64_t counter) noexcept nogil:
    cdef uint64_t bits = _mix(key + (counter + 1) * GOLDEN)
    return (<double>(bits >> 11) + 0.5) * INV_2_53


cdef inline double _normal(uint64_t key, uint64_t step) noexcept nogil:
    cdef double u1 = _uniform(key, 3 * step)
    cdef double u2 = _uniform(key, 3 * step + 1)
    return sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2)


def uniforms(uint64_t seed, uint64_t stream, Py_ssize_t n, uint64_t first_path=0,
             uint64_t counter=0):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef uint64_t base = _base(seed, stream)
    cdef Py_ssize_t i
    for i in range(n):
        o[i] = _uniform(_key(base, first_path + <uint64_t>i), counter)
    return out


cdef int64_t _first_hit(uint64_t key, double barrier, double step_drift, double sq,
                        double inv_var, int64_t n_steps, bint bridge) noexcept nogil:
    cdef double y = 0.0
    cdef double y_next, d1, expo
    cdef int64_t j
    for j in range(n_steps):
        y_next = y + step_drift + sq * _normal(key, <uint64_t>j)
        d1 = barrier - y_next
        if d1 <= 0.0:
            return j + 1
        if bridge:
            expo = inv_var * (barrier - y) * d1
            # exp(-38) lies below every uniform on the 2^-53 grid, so skip the draw
            if expo < 38.0 and _uniform(key, 3 * <uint64_t>j + 2) < exp(-expo):
                return j + 1
        y = y_next
    return -1


def first_passage_steps(log_barrier, drift, double sigma, double dt, int64_t n_steps,
                        uint64_t seed, bint bridge=True, uint64_t stream=0,
                        uint64_t first_path=0, int threads=1):
    cdef double[::1] lb = np.ascontiguousarray(log_barrier, dtype=np.float64)
    cdef double[::1] dr = np.ascontiguousarray(drift, dtype=np.float64)
    cdef Py_ssize_t n = lb.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef double sq = sigma * sqrt(dt)
    cdef double inv_var = 2.0 / (sigma * sigma * dt)
    cdef uint64_t base = _base(seed, stream)
    cdef Py_ssize_t i
    if threads < 1:
        threads = 1
    for i in prange(n, nogil=True, schedule="dynamic", chunksize=256, num_threads=threads):
        if lb[i] <= 0.0:
            out[i] = 0
        else:
            out[i] = _first_hit(_key(base, first_path + <uint64_t>i), lb[i], dr[i] * dt, sq,
                                inv_var, n_steps, bridge)
    return out_arr


def asian_cycle_payoffs(double x0, double mu, double sigma, double t_b, int64_t steps_per_cycle,
                        int64_t n_cycles, double c_rate, double lam, Py_ssize_t n_paths,
                        uint64_t seed, Py_ssize_t n_report=0, uint64_t stream=2,
                        uint64_t first_path=0, int threads=1):
    cdef double dt = t_b / steps_per_cycle
    cdef double drift = (mu - 0.5 * sigma * sigma) * dt
    cdef double sq = sigma * sqrt(dt)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] call_arr = np.zeros(n_paths)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] put_arr = np.zeros(n_paths)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] avg_arr = np.zeros((n_paths, n_report))
    cdef double[::1] call = call_arr
    cdef double[::1] put = put_arr
    cdef double[:, ::1] avgs = avg_arr
    cdef uint64_t base = _base(seed, stream)
    cdef Py_ssize_t i
    cdef int64_t cyc, s
    cdef uint64_t key, step
    cdef double x, x_next, integral, avg, disc, c_acc, p_acc
    if threads < 1:
        threads = 1
    for i in prange(n_paths, nogil=True, schedule="static", num_threads=threads):
        key = _key(base, first_path + <uint64_t>i)
        x = x0
        c_acc = 0.0
        p_acc = 0.0
        step = 0
        for cyc in range(1, n_cycles + 1):
            integral = 0.0
            for s in range(steps_per_cycle):
                x_next = x * exp(drift + sq * _normal(key, step))
                integral = integral + 0.5 * dt * (x + x_next)
                x = x_next
                step = step + 1
            avg = integral / t_b
            disc = exp(-cyc * lam * t_b) * t_b
            if avg > c_rate:
                c_acc = c_acc + disc * (avg - c_rate)
            else:
                p_acc = p_acc + disc * (c_rate - avg)
            if cyc <= n_report:
                avgs[i, cyc - 1] = avg
        call[i] = c_acc
        put[i] = p_acc
    return call_arr, put_arr, avg_arr
