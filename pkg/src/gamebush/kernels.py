"""Numeric kernels with numba acceleration and a pure-numpy fallback.

Three hot loops live here:

* blockwise Euclidean projection onto a product of probability simplexes
  (the retraction used by the myopic solver),
* the damped fixed-point iteration for bundles whose continuation payoffs
  are constant tables (the multilinear case, where the whole iteration can
  run without touching Python objects),
* Gaussian elimination over GF(2) on bit-packed rows (rank / solve for the
  spanning checker).

Each kernel has two implementations.  The numba ones are compiled lazily
with ``cache=True``; the numpy ones are plain vectorized code.  Selection
happens once at import time: set ``GAMEBUSH_NO_NUMBA=1`` to force the numpy
path, e.g. to compare timings (see ``benchmarks/bench_kernels.py``) or on
platforms where numba is unavailable.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """Decorator passthrough so the numba-flavoured defs stay importable."""

        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


USE_NUMBA = HAVE_NUMBA and os.environ.get("GAMEBUSH_NO_NUMBA", "") not in (
    "1",
    "true",
    "yes",
)


# ---------------------------------------------------------------------------
# simplex projection


def _project_simplex_np(x: np.ndarray) -> np.ndarray:
    """Euclidean projection of a single vector onto the probability simplex."""
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, x.size + 1)
    cond = u + (1.0 - css) / j > 0.0
    # cond[0] always holds: u[0] + 1 - u[0] = 1 > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(x + theta, 0.0)


def _project_blocks_np(x: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for i in range(offsets.size - 1):
        a, b = offsets[i], offsets[i + 1]
        out[a:b] = _project_simplex_np(x[a:b])
    return out


@njit(cache=True)
def _project_simplex_nb(x):  # pragma: no cover - timed via tests on outputs
    n = x.size
    u = np.sort(x)[::-1]
    css = 0.0
    rho = 0
    theta = 0.0
    run = 0.0
    for j in range(n):
        run += u[j]
        t = (1.0 - run) / (j + 1.0)
        if u[j] + t > 0.0:
            rho = j
            css = run
    theta = (1.0 - css) / (rho + 1.0)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        v = x[i] + theta
        out[i] = v if v > 0.0 else 0.0
    return out


@njit(cache=True)
def _project_blocks_nb(x, offsets):  # pragma: no cover
    out = np.empty_like(x)
    for i in range(offsets.size - 1):
        a = offsets[i]
        b = offsets[i + 1]
        out[a:b] = _project_simplex_nb(x[a:b])
    return out


# ---------------------------------------------------------------------------
# damped fixed-point iteration, constant-table case
#
# M        (S_total, T) 0/1 consistency matrix, rows grouped per player
# offsets  (N+1,) row offsets of the per-player blocks in M
# base     (T,) root weight times nature weight per terminal
# y        (N, T) frozen payoff table
# The update is sigma <- P(sigma + eta * v(sigma)) with P the blockwise
# simplex projection; eta halves when the orbit revisits the point from two
# steps back while still moving (period-two cycling).


def _myopic_values_np(M, offsets, base, y, sigma):
    nplayers = offsets.size - 1
    T = base.size
    cons = np.empty((nplayers, T))
    for n in range(nplayers):
        a, b = offsets[n], offsets[n + 1]
        cons[n] = sigma[a:b] @ M[a:b]
    v = np.empty_like(sigma)
    for n in range(nplayers):
        others = base.copy()
        for j in range(nplayers):
            if j != n:
                others *= cons[j]
        a, b = offsets[n], offsets[n + 1]
        v[a:b] = M[a:b] @ (others * y[n])
    return v


def _fixed_point_np(M, offsets, base, y, sigma0, eta0, max_iter, tol):
    sigma = sigma0.copy()
    prev = sigma.copy()
    prev2 = sigma.copy()
    eta = eta0
    it = 0
    step = np.inf
    while it < max_iter:
        v = _myopic_values_np(M, offsets, base, y, sigma)
        new = _project_blocks_np(sigma + eta * v, offsets)
        step = float(np.max(np.abs(new - sigma)))
        if step < tol:
            sigma = new
            it += 1
            break
        if it >= 2 and float(np.max(np.abs(new - prev))) < 0.01 * step:
            eta *= 0.5
        prev2, prev = prev, sigma
        sigma = new
        it += 1
    return sigma, it, step < tol


@njit(cache=True)
def _fixed_point_nb(M, offsets, base, y, sigma0, eta0, max_iter, tol):  # pragma: no cover
    nplayers = offsets.size - 1
    T = base.size
    S = sigma0.size
    sigma = sigma0.copy()
    prev = sigma.copy()
    eta = eta0
    cons = np.empty((nplayers, T))
    v = np.empty(S)
    it = 0
    converged = False
    while it < max_iter:
        for n in range(nplayers):
            a = offsets[n]
            b = offsets[n + 1]
            for t in range(T):
                acc = 0.0
                for s in range(a, b):
                    acc += sigma[s] * M[s, t]
                cons[n, t] = acc
        for n in range(nplayers):
            a = offsets[n]
            b = offsets[n + 1]
            for s in range(a, b):
                acc = 0.0
                for t in range(T):
                    if M[s, t] != 0.0:
                        oth = base[t]
                        for j in range(nplayers):
                            if j != n:
                                oth *= cons[j, t]
                        acc += oth * y[n, t]
                v[s] = acc
        new = _project_blocks_nb(sigma + eta * v, offsets)
        step = 0.0
        cyc = 0.0
        for s in range(S):
            d = abs(new[s] - sigma[s])
            if d > step:
                step = d
            d2 = abs(new[s] - prev[s])
            if d2 > cyc:
                cyc = d2
        if step < tol:
            sigma = new
            it += 1
            converged = True
            break
        if it >= 2 and cyc < 0.01 * step:
            eta *= 0.5
        for s in range(S):
            prev[s] = sigma[s]
            sigma[s] = new[s]
        it += 1
    return sigma, it, converged


# ---------------------------------------------------------------------------
# GF(2) elimination on bit-packed rows
#
# Rows are packed with np.packbits(..., bitorder="little"), so column c of
# the boolean matrix is bit (c & 7) of byte (c >> 3).  Elimination runs in
# place and produces reduced row echelon form; the return value is the rank
# and the pivot column of every pivot row.


def _gf2_eliminate_np(aug: np.ndarray, ncols: int):
    nrows = aug.shape[0]
    rank = 0
    pivots = np.full(nrows, -1, dtype=np.int64)
    for c in range(ncols):
        if rank >= nrows:
            break
        byte = c >> 3
        bit = np.uint8(1 << (c & 7))
        col = (aug[:, byte] & bit) != 0
        hits = np.nonzero(col[rank:])[0]
        if hits.size == 0:
            continue
        p = rank + int(hits[0])
        if p != rank:
            tmp = aug[rank].copy()
            aug[rank] = aug[p]
            aug[p] = tmp
        col = (aug[:, byte] & bit) != 0
        col[rank] = False
        if np.any(col):
            aug[col] ^= aug[rank]
        pivots[rank] = c
        rank += 1
    return rank, pivots[:rank].copy()


@njit(cache=True)
def _gf2_eliminate_nb(aug, ncols):  # pragma: no cover
    nrows = aug.shape[0]
    nbytes = aug.shape[1]
    rank = 0
    pivots = np.full(nrows, -1, dtype=np.int64)
    for c in range(ncols):
        if rank >= nrows:
            break
        byte = c >> 3
        bit = np.uint8(1 << (c & 7))
        p = -1
        for r in range(rank, nrows):
            if aug[r, byte] & bit:
                p = r
                break
        if p < 0:
            continue
        if p != rank:
            for k in range(nbytes):
                tmp = aug[rank, k]
                aug[rank, k] = aug[p, k]
                aug[p, k] = tmp
        for r in range(nrows):
            if r != rank and (aug[r, byte] & bit):
                for k in range(nbytes):
                    aug[r, k] ^= aug[rank, k]
        pivots[rank] = c
        rank += 1
    return rank, pivots[:rank].copy()


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    project_blocks = _project_blocks_nb
    fixed_point_constant = _fixed_point_nb
    gf2_eliminate = _gf2_eliminate_nb
else:
    project_blocks = _project_blocks_np
    fixed_point_constant = _fixed_point_np
    gf2_eliminate = _gf2_eliminate_np


def project_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean nearest point of the probability simplex to ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot project an empty vector")
    if USE_NUMBA:
        return _project_simplex_nb(x)
    return _project_simplex_np(x)


def pack_rows(rows: np.ndarray) -> np.ndarray:
    """Pack a boolean matrix into little-endian bit rows for gf2_eliminate."""
    rows = np.ascontiguousarray(np.asarray(rows, dtype=bool))
    if rows.ndim != 2:
        raise ValueError("expected a 2-d boolean matrix")
    return np.packbits(rows, axis=1, bitorder="little")


def unpack_rows(packed: np.ndarray, ncols: int) -> np.ndarray:
    out = np.unpackbits(packed, axis=1, bitorder="little")
    return out[:, :ncols].astype(bool)


def gf2_rank(rows: np.ndarray) -> int:
    rows = np.asarray(rows, dtype=bool)
    if rows.size == 0:
        return 0
    aug = pack_rows(rows)
    rank, _ = gf2_eliminate(aug, rows.shape[1])
    return int(rank)


def gf2_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """One solution of ``a @ z = b`` over GF(2), or None if inconsistent.

    Free variables are set to zero.  ``a`` is (m, n) boolean, ``b`` is (m,).
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    m, n = a.shape
    if b.shape != (m,):
        raise ValueError("shape mismatch between a and b")
    if m == 0:
        return np.zeros(n, dtype=bool)
    aug_bool = np.concatenate([a, b[:, None]], axis=1)
    aug = pack_rows(aug_bool)
    rank, pivots = gf2_eliminate(aug, n + 1)
    # a pivot in the rhs column marks an inconsistent row 0 = 1
    if rank > 0 and pivots[-1] == n:
        return None
    z = np.zeros(n, dtype=bool)
    rhs_byte = n >> 3
    rhs_bit = np.uint8(1 << (n & 7))
    for r in range(rank):
        if aug[r, rhs_byte] & rhs_bit:
            z[pivots[r]] = True
    return z
