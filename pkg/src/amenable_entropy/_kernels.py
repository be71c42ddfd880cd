"""Hot inner loops, each in a numba and a pure-numpy flavour.

The backend is picked once at import from ``AMENABLE_ENTROPY_BACKEND``
(``numba`` or ``numpy``; default ``numba`` when it imports).  Both flavours
are importable regardless so tests and benchmarks can compare them.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    nb = None
    HAVE_NUMBA = False

_requested = os.environ.get("AMENABLE_ENTROPY_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"AMENABLE_ENTROPY_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def _njit(fn):
    if HAVE_NUMBA:
        return nb.njit(cache=False, nogil=True)(fn)
    return fn


# -- tree dynamic programme ---------------------------------------------------
#
# Nodes are stored level by level; ``offsets[l]:offsets[l+1]`` are the nodes of
# level ``l`` and ``parent[i]`` is the global index of node ``i``'s parent.
# A node at level ``l`` weighs ``exp(-s * fsizes[l])``.  For ``maximize`` the
# value of a node is max(weight, sum of children) (heaviest antichain), else
# min(weight, sum of children) (cheapest cover of the leaves).  Levels with
# ``allowed[l] == 0`` may not be used, so their nodes just pass child sums up.


def tree_objective_numpy(parent, offsets, fsizes, s, n_min, allowed, maximize):
    depth = len(offsets) - 2
    val = np.full(offsets[depth + 1] - offsets[depth], math.exp(-s * fsizes[depth]))
    for lev in range(depth, n_min, -1):
        lo, hi = offsets[lev], offsets[lev + 1]
        plo, phi = offsets[lev - 1], offsets[lev]
        acc = np.bincount(parent[lo:hi] - plo, weights=val, minlength=phi - plo)
        if allowed[lev - 1]:
            w = math.exp(-s * fsizes[lev - 1])
            val = np.maximum(acc, w) if maximize else np.minimum(acc, w)
        else:
            val = acc
    return float(val.sum())


@_njit
def _tree_objective_nb(parent, offsets, fsizes, s, n_min, allowed, maximize):
    depth = len(offsets) - 2
    total = offsets[depth + 1]
    val = np.zeros(total)
    w = math.exp(-s * fsizes[depth])
    for i in range(offsets[depth], total):
        val[i] = w
    for lev in range(depth, n_min, -1):
        plo, phi = offsets[lev - 1], offsets[lev]
        for j in range(plo, phi):
            val[j] = 0.0
        for i in range(offsets[lev], offsets[lev + 1]):
            val[parent[i]] += val[i]
        if allowed[lev - 1]:
            w = math.exp(-s * fsizes[lev - 1])
            for j in range(plo, phi):
                if maximize:
                    if w > val[j]:
                        val[j] = w
                elif w < val[j]:
                    val[j] = w
    out = 0.0
    for j in range(offsets[n_min], offsets[n_min + 1]):
        out += val[j]
    return out


def tree_objective_numba(parent, offsets, fsizes, s, n_min, allowed, maximize):
    return float(_tree_objective_nb(parent, offsets, fsizes, float(s), int(n_min),
                                    allowed, bool(maximize)))


# -- walk envelopes -----------------------------------------------------------


def walk_envelopes_numpy(steps):
    omega = np.zeros(len(steps) + 1, dtype=np.int64)
    np.cumsum(steps, out=omega[1:])
    return omega, np.maximum.accumulate(omega), np.minimum.accumulate(omega)


@_njit
def _walk_envelopes_nb(steps):
    n = len(steps)
    omega = np.zeros(n + 1, dtype=np.int64)
    hi = np.zeros(n + 1, dtype=np.int64)
    lo = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        omega[i + 1] = omega[i] + steps[i]
        hi[i + 1] = max(hi[i], omega[i + 1])
        lo[i + 1] = min(lo[i], omega[i + 1])
    return omega, hi, lo


def walk_envelopes_numba(steps):
    return _walk_envelopes_nb(np.ascontiguousarray(steps, dtype=np.int64))


def range_at_numpy(steps_matrix):
    """R(L) = max - min of each row's walk (rows are trials)."""
    omega = np.cumsum(steps_matrix, axis=1)
    hi = np.maximum(omega.max(axis=1), 0)
    lo = np.minimum(omega.min(axis=1), 0)
    return hi - lo


@_njit
def _range_at_nb(steps_matrix):
    trials, n = steps_matrix.shape
    out = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        w = 0
        hi = 0
        lo = 0
        for i in range(n):
            w += steps_matrix[t, i]
            if w > hi:
                hi = w
            elif w < lo:
                lo = w
        out[t] = hi - lo
    return out


def range_at_numba(steps_matrix):
    return _range_at_nb(np.ascontiguousarray(steps_matrix, dtype=np.int64))


# -- sliding-window pattern histogram on a line -------------------------------
#
# ``values`` holds a configuration on a contiguous stretch of Z; ``offsets`` are
# the window positions (sorted, relative to the anchor); anchors run over
# ``first .. first + count - 1`` (indices into ``values``).  Each anchor's
# window pattern is encoded base ``base`` with the first offset most significant.


def window_histogram_numpy(values, offsets, base, first, count):
    code = np.zeros(count, dtype=np.int64)
    for off in offsets:
        code = code * base + values[first + off: first + off + count]
    return np.bincount(code, minlength=base ** len(offsets))


@_njit
def _window_histogram_nb(values, offsets, base, first, count):
    k = len(offsets)
    size = 1
    for _ in range(k):
        size *= base
    hist = np.zeros(size, dtype=np.int64)
    for a in range(first, first + count):
        c = 0
        for j in range(k):
            c = c * base + values[a + offsets[j]]
        hist[c] += 1
    return hist


def window_histogram_numba(values, offsets, base, first, count):
    return _window_histogram_nb(np.ascontiguousarray(values, dtype=np.int64),
                                np.ascontiguousarray(offsets, dtype=np.int64),
                                int(base), int(first), int(count))


NUMPY = {
    "tree_objective": tree_objective_numpy,
    "walk_envelopes": walk_envelopes_numpy,
    "range_at": range_at_numpy,
    "window_histogram": window_histogram_numpy,
}
NUMBA = {
    "tree_objective": tree_objective_numba,
    "walk_envelopes": walk_envelopes_numba,
    "range_at": range_at_numba,
    "window_histogram": window_histogram_numba,
} if HAVE_NUMBA else dict(NUMPY)

_ACTIVE = NUMBA if BACKEND == "numba" else NUMPY


def kernel(name: str):
    """The active implementation of kernel ``name``."""
    return _ACTIVE[name]
