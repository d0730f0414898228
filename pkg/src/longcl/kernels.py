"""Numeric inner loops.

Each kernel has a numba version and a pure numpy version with the same
signature. The numba path is used when numba imports cleanly and the
environment variable ``LONGCL_DISABLE_NUMBA`` is unset (or ``0``). Both
paths are always importable as ``nb_<name>`` / ``np_<name>`` so tests and
benchmarks can compare them directly.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda fn: fn


def _env_disabled():
    return os.environ.get("LONGCL_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


# ---------------------------------------------------------------------------
# per-unit L2 norm of a difference


@njit(cache=True)
def nb_unit_drift(prev, curr, starts, stops):
    n_units = starts.shape[0]
    out = np.empty(n_units, dtype=np.float64)
    for u in range(n_units):
        acc = 0.0
        for i in range(starts[u], stops[u]):
            d = prev[i] - curr[i]
            acc += d * d
        out[u] = np.sqrt(acc)
    return out


def np_unit_drift(prev, curr, starts, stops):
    sq = (prev - curr) ** 2
    csum = np.concatenate(([0.0], np.cumsum(sq)))
    # cumsum differences can dip a hair below zero
    return np.sqrt(np.maximum(csum[stops] - csum[starts], 0.0))


# ---------------------------------------------------------------------------
# unit-broadcast convex fusion: out = beta * curr + (1 - beta) * prev


@njit(cache=True)
def nb_fuse(prev, curr, beta, starts, stops):
    out = np.empty_like(prev)
    for u in range(starts.shape[0]):
        b = beta[u]
        for i in range(starts[u], stops[u]):
            out[i] = b * curr[i] + (1.0 - b) * prev[i]
    return out


def np_fuse(prev, curr, beta, starts, stops):
    b = np.repeat(beta, stops - starts)
    return b * curr + (1.0 - b) * prev


# ---------------------------------------------------------------------------
# stable top-k: order by value (desc if largest else asc), ties by lower index


@njit(cache=True)
def _before(va, ia, vb, ib, largest):
    if va == vb:
        return ia < ib
    if largest:
        return va > vb
    return va < vb


@njit(cache=True)
def _sift_down(heap, size, pos, values, largest):
    # heap root holds the entry ranked last among those kept
    while True:
        child = 2 * pos + 1
        if child >= size:
            return
        if child + 1 < size and _before(values[heap[child]], heap[child], values[heap[child + 1]], heap[child + 1], largest):
            child += 1
        if not _before(values[heap[pos]], heap[pos], values[heap[child]], heap[child], largest):
            return
        heap[pos], heap[child] = heap[child], heap[pos]
        pos = child


@njit(cache=True)
def nb_topk(values, k, largest):
    n = values.shape[0]
    if k > n:
        k = n
    heap = np.empty(k, dtype=np.int64)
    for i in range(k):
        heap[i] = i
    for pos in range(k // 2 - 1, -1, -1):
        _sift_down(heap, k, pos, values, largest)
    for i in range(k, n):
        root = heap[0]
        if _before(values[i], i, values[root], root, largest):
            heap[0] = i
            _sift_down(heap, k, 0, values, largest)
    # pop the last-ranked entry into the back slot until the heap is empty
    out = np.empty(k, dtype=np.int64)
    for size in range(k, 0, -1):
        out[size - 1] = heap[0]
        heap[0] = heap[size - 1]
        _sift_down(heap, size - 1, 0, values, largest)
    return out


def np_topk(values, k, largest):
    n = values.shape[0]
    k = min(k, n)
    key = -values if largest else values
    order = np.lexsort((np.arange(n), key))
    return order[:k].astype(np.int64)


# ---------------------------------------------------------------------------
# Euclidean distances between the rows of x and the rows of centers


@njit(cache=True)
def nb_pairwise_dist(x, centers):
    n, e = x.shape
    m = centers.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for c in range(e):
                d = x[i, c] - centers[j, c]
                acc += d * d
            out[i, j] = np.sqrt(acc)
    return out


def np_pairwise_dist(x, centers):
    diff = x[:, None, :] - centers[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


if USE_NUMBA:
    unit_drift = nb_unit_drift
    fuse = nb_fuse
    topk = nb_topk
    pairwise_dist = nb_pairwise_dist
else:
    unit_drift = np_unit_drift
    fuse = np_fuse
    topk = np_topk
    pairwise_dist = np_pairwise_dist


def backend():
    return "numba" if USE_NUMBA else "numpy"
