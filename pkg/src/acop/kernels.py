"""Numeric inner loops.

Every kernel exists twice: a loop version that numba compiles with
``@njit`` and a vectorised numpy version. Both perform the same IEEE
operations in the same order, so they return bit-identical results and
the choice between them never changes a negotiation transcript.

The numba path is used when numba imports and ``ACOP_DISABLE_NUMBA`` is
unset (or set to ``0``). Setting ``ACOP_DISABLE_NUMBA=1`` selects numpy.

Tables passed in are *weighted* evaluation tables ``W[i, v] = w_i * e_i(v)``
padded to a rectangle; ``sizes[i]`` gives the live width of row ``i``.
Utilities are always accumulated issue by issue starting from ``0.0``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_disables_numba() -> bool:
    flag = os.environ.get("ACOP_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no", "off")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _env_disables_numba()


def _njit(func):
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


# --------------------------------------------------------------------------
# all-offer utility vector (offer_index order)


def _offer_utilities_loop(W, sizes):
    n = W.shape[0]
    total = 1
    for i in range(n):
        total *= sizes[i]
    out = np.empty(total, dtype=np.float64)
    digits = np.zeros(n, dtype=np.int64)
    for k in range(total):
        acc = 0.0
        for i in range(n):
            acc += W[i, digits[i]]
        out[k] = acc
        j = n - 1
        while j >= 0:
            digits[j] += 1
            if digits[j] < sizes[j]:
                break
            digits[j] = 0
            j -= 1
    return out


def offer_utilities_numpy(W: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    grid = np.indices(tuple(int(s) for s in sizes)).reshape(len(sizes), -1)
    acc = np.zeros(grid.shape[1], dtype=np.float64)
    for i in range(len(sizes)):
        acc = acc + W[i, grid[i]]
    return acc


offer_utilities_jit = _njit(_offer_utilities_loop)


# --------------------------------------------------------------------------
# joint acceptability count


def _count_joint_loop(ua, ub, ta, tb):
    count = 0
    for k in range(ua.shape[0]):
        if ua[k] >= ta and ub[k] >= tb:
            count += 1
    return count


def count_joint_numpy(ua: np.ndarray, ub: np.ndarray, ta: float, tb: float) -> int:
    return int(np.count_nonzero((ua >= ta) & (ub >= tb)))


count_joint_jit = _njit(_count_joint_loop)


# --------------------------------------------------------------------------
# inverse-CDF sampling of offers until one clears a threshold


def _sample_acceptable_loop(cum, W, uniforms, threshold, out):
    rows, n = uniforms.shape
    for r in range(rows):
        acc = 0.0
        for i in range(n):
            u = uniforms[r, i]
            j = 0
            while cum[i, j] <= u:
                j += 1
            out[i] = j
            acc += W[i, j]
        if acc >= threshold:
            return r
    return -1


def sample_acceptable_numpy(cum, W, uniforms, threshold, out):
    rows, n = uniforms.shape
    idx = np.empty((rows, n), dtype=np.int64)
    acc = np.zeros(rows, dtype=np.float64)
    for i in range(n):
        idx[:, i] = np.searchsorted(cum[i], uniforms[:, i], side="right")
        acc = acc + W[i, idx[:, i]]
    hits = np.flatnonzero(acc >= threshold)
    if hits.size == 0:
        return -1
    r = int(hits[0])
    out[:] = idx[r]
    return r


sample_acceptable_jit = _njit(_sample_acceptable_loop)


# --------------------------------------------------------------------------
# best-completion bound per (issue, value)


def _completion_bounds_loop(W, sizes):
    n = W.shape[0]
    best = np.empty(n, dtype=np.float64)
    for i in range(n):
        b = W[i, 0]
        for v in range(1, sizes[i]):
            if W[i, v] > b:
                b = W[i, v]
        best[i] = b
    out = np.full(W.shape, -np.inf)
    for i in range(n):
        for v in range(sizes[i]):
            acc = 0.0
            for j in range(n):
                if j == i:
                    acc += W[i, v]
                else:
                    acc += best[j]
            out[i, v] = acc
    return out


def completion_bounds_numpy(W: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    n = W.shape[0]
    live = np.arange(W.shape[1])[None, :] < np.asarray(sizes)[:, None]
    best = np.where(live, W, -np.inf).max(axis=1)
    out = np.zeros(W.shape, dtype=np.float64)
    for j in range(n):
        column = np.full(W.shape, best[j])
        column[j, :] = W[j, :]
        out = out + column
    return np.where(live, out, -np.inf)


completion_bounds_jit = _njit(_completion_bounds_loop)


if USE_NUMBA:
    offer_utilities = offer_utilities_jit
    count_joint = count_joint_jit
    sample_acceptable = sample_acceptable_jit
    completion_bounds = completion_bounds_jit
else:
    offer_utilities = offer_utilities_numpy
    count_joint = count_joint_numpy
    sample_acceptable = sample_acceptable_numpy
    completion_bounds = completion_bounds_numpy


def backend() -> str:
    """Name of the kernel implementation in use (``"numba"`` or ``"numpy"``)."""
    return "numba" if USE_NUMBA else "numpy"
