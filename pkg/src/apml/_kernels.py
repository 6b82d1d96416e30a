"""Line-scan kernels for building directional COO streams.

A *line* is one row (or column) of the implicit cost matrix: one point of
``a`` against every point of ``b``. Lines are independent, so the outer
loops are parallel, while every reduction inside a line runs in a fixed
left-to-right order. Results are therefore identical for any thread count.

The prune test ``exp(-T (d - d_min)) >= tau`` is evaluated in the
equivalent form ``d <= d_min + log(1/tau) / T`` on squared distances, so
``exp`` and ``sqrt`` run only for kept entries. Both passes use the same
test, so counts and writes always agree.
"""

import os

import numba
import numpy as np
from numba import njit, prange

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # skip probing an outdated TBB before OpenMP
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(inline="always")
def _sqdist(a, i, b, k):
    acc = 0.0
    for c in range(a.shape[1]):
        t = a[i, c] - b[k, c]
        acc += t * t
    return acc


@njit(inline="always")
def _cutoff_sq(m1_sq, d1, t, log_inv_tau):
    # squared-distance bound for kept entries; never below the minimum itself
    if t <= 0.0 or log_inv_tau == np.inf:
        return np.inf
    r = d1 + log_inv_tau / t
    return max(r * r, m1_sq)


@njit(parallel=True, cache=True)
def scan_lines(a, b, log_num, delta, eps_g, log_inv_tau, uniform_mode):
    """Pass 1: per-line minimum, temperature and kept count.

    Returns ``(c_min, c_min_sq, temp, argmin, second_argmin, count, degenerate)``.
    ``second_argmin`` is -1 for single-entry lines. Ties resolve to the
    lowest index.
    """
    n_lines = a.shape[0]
    k = b.shape[0]
    c_min = np.empty(n_lines)
    c_min_sq = np.empty(n_lines)
    temp = np.zeros(n_lines)
    j1 = np.empty(n_lines, dtype=np.int64)
    j2 = np.full(n_lines, -1, dtype=np.int64)
    count = np.empty(n_lines, dtype=np.int64)
    degenerate = np.zeros(n_lines, dtype=np.bool_)
    for i in prange(n_lines):
        buf = np.empty(k)
        m1 = np.inf
        m2 = np.inf
        a1 = -1
        a2 = -1
        for q in range(k):
            dq = _sqdist(a, i, b, q)
            buf[q] = dq
            if dq < m1:
                m2 = m1
                a2 = a1
                m1 = dq
                a1 = q
            elif dq < m2:
                m2 = dq
                a2 = q
        d1 = np.sqrt(m1)
        c_min[i] = d1
        c_min_sq[i] = m1
        j1[i] = a1
        j2[i] = a2
        if k == 1:
            count[i] = 1
            continue
        second = np.sqrt(m2) - d1
        gap = second + delta
        if uniform_mode:
            if second < eps_g:
                degenerate[i] = True
                count[i] = k
                continue
        elif gap < eps_g:
            degenerate[i] = True
            gap = eps_g
        t = log_num / gap
        temp[i] = t
        cut = _cutoff_sq(m1, d1, t, log_inv_tau)
        cnt = 0
        for q in range(k):
            if buf[q] <= cut:
                cnt += 1
        count[i] = cnt
    return c_min, c_min_sq, temp, j1, j2, count, degenerate


@njit(parallel=True, cache=True)
def write_lines(a, b, c_min, c_min_sq, temp, offsets, degenerate, log_inv_tau, uniform_mode):
    """Pass 2: rescan, write kept entries at their offsets, normalize per line."""
    n_lines = a.shape[0]
    k = b.shape[0]
    nnz = offsets[n_lines]
    line_idx = np.empty(nnz, dtype=np.int32)
    other_idx = np.empty(nnz, dtype=np.int32)
    vals = np.empty(nnz)
    for i in prange(n_lines):
        start = offsets[i]
        w = start
        if k == 1:
            line_idx[w] = i
            other_idx[w] = 0
            vals[w] = 1.0
            continue
        if uniform_mode and degenerate[i]:
            for q in range(k):
                line_idx[w] = i
                other_idx[w] = q
                vals[w] = 1.0 / k
                w += 1
            continue
        t = temp[i]
        d1 = c_min[i]
        cut = _cutoff_sq(c_min_sq[i], d1, t, log_inv_tau)
        for q in range(k):
            dq = _sqdist(a, i, b, q)
            if dq <= cut:
                line_idx[w] = i
                other_idx[w] = q
                vals[w] = np.exp(-t * (np.sqrt(dq) - d1))
                w += 1
        total = 0.0
        for e in range(start, w):
            total += vals[e]
        for e in range(start, w):
            vals[e] = vals[e] / total
    return line_idx, other_idx, vals


def set_threads(threads: int | None) -> int:
    """Set the kernel worker count; ``0`` or ``None`` means all available cores."""
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if not threads else max(1, min(int(threads), limit))
    numba.set_num_threads(n)
    return n
