"""Compiled kernels backing the execution backends.

Every kernel comes in two flavours.  The ``*_seq`` flavour is strictly
sequential with a pinned accumulation order (left to right); it defines
the reference semantics.  The ``*_par`` flavour decomposes the index
space into ``nchunks`` contiguous pieces, reduces each piece left to
right, and combines the partial results in chunk order.  Its output
therefore depends only on the chunk count, never on how the runtime
schedules threads, which keeps parallel runs reproducible.

Scalars (alpha, beta, s) must be passed as numpy scalars of the array
dtype so no intermediate is widened to float64 behind the caller's back.
"""

from contextlib import contextmanager

import numpy as np
from numba import config as _nb_config
from numba import get_num_threads, njit, prange, set_num_threads


@contextmanager
def active_threads(n: int):
    """Temporarily set the numba thread pool size, clamped to what exists."""
    want = min(max(int(n), 1), _nb_config.NUMBA_NUM_THREADS)
    old = get_num_threads()
    set_num_threads(want)
    try:
        yield
    finally:
        set_num_threads(old)


# ---------------------------------------------------------------------------
# dense vector ops


@njit(cache=True)
def dot_seq(x, y):
    acc = x.dtype.type(0.0)
    for k in range(x.size):
        acc += x[k] * y[k]
    return acc


@njit(cache=True, parallel=True)
def dot_par(x, y, nchunks):
    n = x.size
    partials = np.zeros(nchunks, x.dtype)
    for s in prange(nchunks):
        lo = n * s // nchunks
        hi = n * (s + 1) // nchunks
        acc = x.dtype.type(0.0)
        for k in range(lo, hi):
            acc += x[k] * y[k]
        partials[s] = acc
    total = x.dtype.type(0.0)
    for s in range(nchunks):  # combine in chunk order, not reduction-tree order
        total += partials[s]
    return total


@njit(cache=True)
def axpy_seq(alpha, x, y, out):
    for k in range(out.size):
        out[k] = alpha * x[k] + y[k]


@njit(cache=True, parallel=True)
def axpy_par(alpha, x, y, out):
    # elementwise map: scheduling cannot change the result
    for k in prange(out.size):
        out[k] = alpha * x[k] + y[k]


# ---------------------------------------------------------------------------
# sparse matrix-vector products, y = alpha*A@x + beta*y


@njit(cache=True)
def csr_spmv_seq(row_ptrs, col_idxs, values, x, y, alpha, beta):
    for i in range(y.size):
        acc = values.dtype.type(0.0)
        for k in range(row_ptrs[i], row_ptrs[i + 1]):
            acc += values[k] * x[col_idxs[k]]
        if beta == 0.0:  # overwrite so stale/NaN y never leaks through
            y[i] = alpha * acc
        else:
            y[i] = alpha * acc + beta * y[i]


@njit(cache=True, parallel=True)
def csr_spmv_par(row_ptrs, col_idxs, values, x, y, alpha, beta):
    # one row per task keeps the per-row accumulation identical to _seq
    for i in prange(y.size):
        acc = values.dtype.type(0.0)
        for k in range(row_ptrs[i], row_ptrs[i + 1]):
            acc += values[k] * x[col_idxs[k]]
        if beta == 0.0:
            y[i] = alpha * acc
        else:
            y[i] = alpha * acc + beta * y[i]


@njit(cache=True)
def coo_spmv_seq(row_idxs, col_idxs, values, x, y, alpha, beta):
    if beta == 0.0:
        for i in range(y.size):
            y[i] = values.dtype.type(0.0)
    else:
        for i in range(y.size):
            y[i] = beta * y[i]
    nz = values.size
    if nz == 0:
        return
    # entries are row-sorted: accumulate each row run, flush on row change
    run_row = row_idxs[0]
    acc = values[0] * x[col_idxs[0]]
    for k in range(1, nz):
        r = row_idxs[k]
        if r != run_row:
            y[run_row] += alpha * acc
            run_row = r
            acc = values[k] * x[col_idxs[k]]
        else:
            acc += values[k] * x[col_idxs[k]]
    y[run_row] += alpha * acc


@njit(cache=True, parallel=True)
def coo_spmv_par(row_idxs, col_idxs, values, x, y, alpha, beta, nchunks):
    if beta == 0.0:
        for i in prange(y.size):
            y[i] = values.dtype.type(0.0)
    else:
        for i in prange(y.size):
            y[i] = beta * y[i]
    nz = values.size
    if nz == 0:
        return
    # Nonzeros split into contiguous segments.  A row run that is interior
    # to a segment belongs to no other segment (rows are sorted) and is
    # flushed directly.  The first and last runs may straddle a boundary;
    # their partial sums are carried out and merged in segment order.
    first_row = np.full(nchunks, -1, np.int64)
    last_row = np.full(nchunks, -1, np.int64)
    first_sum = np.zeros(nchunks, values.dtype)
    last_sum = np.zeros(nchunks, values.dtype)
    for s in prange(nchunks):
        lo = nz * s // nchunks
        hi = nz * (s + 1) // nchunks
        if lo >= hi:
            continue
        run_row = row_idxs[lo]
        acc = values[lo] * x[col_idxs[lo]]
        opened = False  # becomes True once the first (carried) run is closed
        for k in range(lo + 1, hi):
            r = row_idxs[k]
            if r != run_row:
                if opened:
                    y[run_row] += alpha * acc
                else:
                    first_row[s] = run_row
                    first_sum[s] = acc
                    opened = True
                run_row = r
                acc = values[k] * x[col_idxs[k]]
            else:
                acc += values[k] * x[col_idxs[k]]
        if opened:
            last_row[s] = run_row
            last_sum[s] = acc
        else:
            first_row[s] = run_row
            first_sum[s] = acc
    for s in range(nchunks):
        if first_row[s] >= 0:
            y[first_row[s]] += alpha * first_sum[s]
        if last_row[s] >= 0:
            y[last_row[s]] += alpha * last_sum[s]


# ---------------------------------------------------------------------------
# streaming bandwidth kernels (BabelStream-style)


@njit(cache=True)
def stream_copy_seq(a, c):
    for k in range(a.size):
        c[k] = a[k]


@njit(cache=True, parallel=True)
def stream_copy_par(a, c):
    for k in prange(a.size):
        c[k] = a[k]


@njit(cache=True)
def stream_mul_seq(b, c, s):
    for k in range(b.size):
        b[k] = s * c[k]


@njit(cache=True, parallel=True)
def stream_mul_par(b, c, s):
    for k in prange(b.size):
        b[k] = s * c[k]


@njit(cache=True)
def stream_add_seq(a, b, c):
    for k in range(a.size):
        c[k] = a[k] + b[k]


@njit(cache=True, parallel=True)
def stream_add_par(a, b, c):
    for k in prange(a.size):
        c[k] = a[k] + b[k]


@njit(cache=True)
def stream_triad_seq(a, b, c, s):
    for k in range(a.size):
        a[k] = b[k] + s * c[k]


@njit(cache=True, parallel=True)
def stream_triad_par(a, b, c, s):
    for k in prange(a.size):
        a[k] = b[k] + s * c[k]


# stream dot reuses dot_seq / dot_par


# ---------------------------------------------------------------------------
# compute-peak probe: register-resident multiply-add sweeps


@njit(cache=True)
def fma_sweeps_seq(buf, s, c, sweeps):
    # 2 flops per element per sweep; buf small enough to live in cache
    for _ in range(sweeps):
        for k in range(buf.size):
            buf[k] = buf[k] * s + c
    return buf[0]


@njit(cache=True, parallel=True)
def fma_sweeps_par(buf, s, c, sweeps, nchunks):
    n = buf.size
    for t in prange(nchunks):
        lo = n * t // nchunks
        hi = n * (t + 1) // nchunks
        for _ in range(sweeps):
            for k in range(lo, hi):
                buf[k] = buf[k] * s + c
    return buf[0]


def warm_kernels() -> None:
    """Force-compile every kernel for both precisions.

    Called once by timing-sensitive code paths so JIT compilation never
    lands inside a measured region.  Compiled artifacts are cached on
    disk, so after the first call this is cheap.
    """
    for dt in (np.float32, np.float64):
        v = np.arange(4, dtype=dt)
        w = np.ones(4, dtype=dt)
        out = np.empty(4, dtype=dt)
        one = dt(1.0)
        zero = dt(0.0)
        dot_seq(v, w)
        dot_par(v, w, 2)
        axpy_seq(one, v, w, out)
        axpy_par(one, v, w, out)
        rp = np.array([0, 1, 2], dtype=np.int32)
        ci = np.array([0, 1], dtype=np.int32)
        vals = np.ones(2, dtype=dt)
        y2 = np.zeros(2, dtype=dt)
        x2 = np.ones(2, dtype=dt)
        csr_spmv_seq(rp, ci, vals, x2, y2, one, zero)
        csr_spmv_par(rp, ci, vals, x2, y2, one, one)
        ri = np.array([0, 1], dtype=np.int32)
        coo_spmv_seq(ri, ci, vals, x2, y2, one, zero)
        coo_spmv_seq(ri, ci, vals, x2, y2, one, one)
        coo_spmv_par(ri, ci, vals, x2, y2, one, zero, 2)
        coo_spmv_par(ri, ci, vals, x2, y2, one, one, 2)
        a = np.ones(8, dtype=dt)
        b = np.ones(8, dtype=dt)
        cbuf = np.zeros(8, dtype=dt)
        sc = dt(0.4)
        stream_copy_seq(a, cbuf)
        stream_copy_par(a, cbuf)
        stream_mul_seq(b, cbuf, sc)
        stream_mul_par(b, cbuf, sc)
        stream_add_seq(a, b, cbuf)
        stream_add_par(a, b, cbuf)
        stream_triad_seq(a, b, cbuf, sc)
        stream_triad_par(a, b, cbuf, sc)
        fma_sweeps_seq(a.copy(), sc, sc, 2)
        fma_sweeps_par(a.copy(), sc, sc, 2, 2)
