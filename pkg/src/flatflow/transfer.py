"""Transfer-operator sums over closed saddle paths, binned in length.

Explicit enumeration of closed saddle paths is exponential in the period.
Here the sums are computed instead by dynamic programming over
(current saddle connection, length bin) from every starting connection,
giving based closed walks per step count; a Moebius-type recursion over
proper powers turns those into sums over cyclic classes.

Lengths are rounded to a grid of width `h`, so a class whose true period lies
within about ``n_steps * h / 2`` of a window edge may be assigned to the
neighboring window. Integer-valued lengths are exact when 1/h is an integer.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .saddles import ConcatGraph
from .surface import TOL_ANGLE

DEFAULT_H = 1.0 / 256


class _Ranges:
    """Cyclic predecessor ranges in beta order for the node prefix ``0..K-1``.

    Row j's admissible predecessors (within the prefix) are the rows
    ``perm[lo1:hi1]`` and ``perm[lo2:hi2]`` of the class-blocked beta order,
    so the predecessor sum of any array is a difference of prefix sums.
    """

    def __init__(self, g: ConcatGraph, K: int):
        s = g.surface
        nodes = g.nodes[:K]
        end = np.array([sc.end for sc in nodes], dtype=np.int64)
        start = np.array([sc.start for sc in nodes], dtype=np.int64)
        beta = np.array([sc.beta for sc in nodes])
        alpha = np.array([sc.alpha for sc in nodes])
        perm = np.lexsort((np.arange(K), beta, end))
        self.perm = perm
        # block c occupies [off[c], off[c+1]) of perm; prefix-sum rows get one extra leading zero per block
        n_cls = len(s.classes)
        counts = np.bincount(end, minlength=n_cls)
        off = np.concatenate([[0], np.cumsum(counts)])
        self.block_off = off
        self.cs_index = np.concatenate([np.arange(off[c], off[c + 1] + 1) + c for c in range(n_cls)]) if K else np.zeros(0, dtype=np.int64)
        sorted_beta = beta[perm]
        totals = np.array([cl.total_angle for cl in s.classes])
        L = totals[start]
        lo = alpha - (L - math.pi + TOL_ANGLE)
        span = (L - 2 * math.pi) + 2 * TOL_ANGLE
        lo_m = np.mod(lo, L)
        lo1 = np.zeros(K, dtype=np.int64)
        hi1 = np.zeros(K, dtype=np.int64)
        lo2 = np.zeros(K, dtype=np.int64)
        hi2 = np.zeros(K, dtype=np.int64)
        for c in range(n_cls):
            rows = np.flatnonzero(start == c)
            if len(rows) == 0:
                continue
            b = sorted_beta[off[c]:off[c + 1]]
            a = lo_m[rows]
            top = a + span[rows]
            wrap = top >= L[rows]
            base = off[c] + c  # position of this block's leading zero in the stacked prefix sums
            l1 = np.searchsorted(b, a, "left")
            h1 = np.where(wrap, len(b), np.searchsorted(b, top, "right"))
            h2 = np.where(wrap, np.searchsorted(b, top - L[rows], "right"), 0)
            lo1[rows] = base + l1
            hi1[rows] = base + h1
            lo2[rows] = base
            hi2[rows] = base + h2
        self.lo1, self.hi1, self.lo2, self.hi2 = lo1, hi1, lo2, hi2
        self.n_cls = n_cls

    def pred_sums(self, cur: np.ndarray) -> np.ndarray:
        K, B = cur.shape
        off = self.block_off
        stacked = np.zeros((K + self.n_cls, B))
        x = cur[self.perm]
        for c in range(self.n_cls):
            a, b = off[c], off[c + 1]
            if b > a:
                np.cumsum(x[a:b], axis=0, out=stacked[a + c + 1:b + c + 1])
        S = stacked[self.hi1] - stacked[self.lo1]
        S += stacked[self.hi2]
        S -= stacked[self.lo2]
        return S

    def as_matrix(self) -> np.ndarray:
        """Boolean [pred, succ] matrix described by the ranges (for verification)."""
        K = len(self.perm)
        inv = np.full(K + self.n_cls, -1, dtype=np.int64)
        for c in range(self.n_cls):
            a, b = self.block_off[c], self.block_off[c + 1]
            inv[a + c + 1:b + c + 1] = self.perm[a:b]
        out = np.zeros((K, K), dtype=bool)
        for j in range(K):
            for lo, hi in ((self.lo1[j], self.hi1[j]), (self.lo2[j], self.hi2[j])):
                out[inv[lo + 1:hi + 1], j] = True
        return out


def check_ranges(g: ConcatGraph) -> bool:
    """True when the cyclic-range predecessor structure reproduces the adjacency matrix."""
    K = len(g.nodes)
    if K == 0:
        return True
    return bool(np.array_equal(_Ranges(g, K).as_matrix(), g.adj))


@dataclass
class BasedSums:
    """Sums over based closed walks, indexed [n_steps][length bin]."""

    h: float
    nbins: int
    weighted: dict = field(default_factory=dict)
    tangent: dict = field(default_factory=dict)


def thread_count(threads: int | None = None) -> int:
    """Worker count: explicit argument, else FLATFLOW_THREADS, else 1."""
    if threads is None:
        threads = int(os.environ.get("FLATFLOW_THREADS", "1") or 1)
    return max(1, int(threads))


def based_closed_sums(g: ConcatGraph, logw: np.ndarray, qmax: float, h: float = DEFAULT_H,
                      tangent: np.ndarray | None = None, use_ranges: bool | None = None,
                      threads: int | None = None) -> BasedSums:
    """For every step count n, the sum over based closed walks of exp(sum logw).

    With `tangent` (an additive per-connection quantity F), also returns the
    sums of exp(sum logw) * (sum F). Starts may run on several threads; their
    results are always added in start order, so the output does not depend
    on the thread count.
    """
    n_nodes = len(g.nodes)
    nbins = int(math.floor(qmax / h + 1e-9))
    out = BasedSums(h, nbins)
    if n_nodes == 0:
        return out
    L = np.rint(g.lengths / h).astype(np.int64)
    w = np.exp(logw)
    if use_ranges is None:
        use_ranges = check_ranges(g)
    starts = [i for i in range(n_nodes) if L[i] <= nbins]

    def run(i):
        K = int(np.searchsorted(L, nbins - L[i], "right"))  # nodes are sorted by length
        ranges = _Ranges(g, K) if use_ranges and K else None
        return _start_dp(g, i, K, L, w, nbins, tangent, ranges)

    def add(i, closed_i):
        for n, (arr, tarr) in closed_i.items():
            if n not in out.weighted:
                out.weighted[n] = np.zeros(nbins + 1)
                if tangent is not None:
                    out.tangent[n] = np.zeros(nbins + 1)
            out.weighted[n][L[i]:] += arr
            if tarr is not None:
                out.tangent[n][L[i]:] += tarr

    workers = thread_count(threads)
    if workers == 1:
        for i in starts:
            add(i, run(i))
    else:
        with ThreadPoolExecutor(workers) as pool:
            for i, closed_i in zip(starts, pool.map(run, starts)):
                add(i, closed_i)
    return out


def _start_dp(g, i, K, L, w, nbins, tangent, ranges):
    """Closed-walk sums from start i; arrays are offset so that bin 0 is length L[i]."""
    res = {}
    B = nbins - L[i] + 1
    adj = g.adj
    if adj[i, i]:
        arr = np.zeros(B)
        arr[0] = w[i]
        tarr = None
        if tangent is not None:
            tarr = np.zeros(B)
            tarr[0] = w[i] * tangent[i]
        res[1] = (arr, tarr)
    if K == 0:
        return res
    succ = np.flatnonzero(adj[i, :K])
    cur = np.zeros((K, B))
    cur_t = np.zeros((K, B)) if tangent is not None else None
    for j in succ:
        b = L[j]
        if b < B:
            cur[j, b] += w[i] * w[j]
            if cur_t is not None:
                cur_t[j, b] += w[i] * w[j] * (tangent[i] + tangent[j])
    close_col = adj[:K, i].astype(float)
    if ranges is None:
        adjT = adj[:K, :K].T.astype(float)
    groups = {}
    for j in range(K):
        groups.setdefault(int(L[j]), []).append(j)
    groups = [(l, np.array(rows)) for l, rows in sorted(groups.items()) if l < B]
    unit = bool(np.all(w[:K] == 1.0))
    n = 2
    while cur.any():
        arr = close_col @ cur
        if arr.any():
            res[n] = (arr, close_col @ cur_t if cur_t is not None else None)
        S = ranges.pred_sums(cur) if ranges is not None else adjT @ cur
        S_t = None
        if cur_t is not None:
            S_t = ranges.pred_sums(cur_t) if ranges is not None else adjT @ cur_t
        nxt = np.zeros_like(cur)
        nxt_t = np.zeros_like(cur) if cur_t is not None else None
        for l, rows in groups:
            src = S[rows, :B - l]
            nxt[rows, l:] = src if unit else w[rows, None] * src
            if nxt_t is not None:
                val = S_t[rows, :B - l] + tangent[rows, None] * src
                nxt_t[rows, l:] = val if unit else w[rows, None] * val
        cur, cur_t = nxt, nxt_t
        n += 1
    return res


class NecklaceSums:
    """Per-bin sums over cyclic classes of closed saddle paths.

    `logw[j]` is the log-weight of connection j (its potential integral) and
    `tangent[j]` an optional additive observable integral. After construction,
    ``weights[b]`` is the sum of exp(Phi) over classes of binned period b*h
    and ``tangents[b]`` the sum of exp(Phi) * F. Proper powers are handled by
    recomputing based sums at scaled weights.
    """

    def __init__(self, g: ConcatGraph, logw, qmax: float, h: float = DEFAULT_H, tangent=None,
                 threads: int | None = None):
        self.g = g
        self.h = h
        self.qmax = qmax
        self.nbins = int(math.floor(qmax / h + 1e-9))
        logw = np.asarray(logw, dtype=float)
        tangent = None if tangent is None else np.asarray(tangent, dtype=float)
        self.L = np.rint(g.lengths / h).astype(np.int64) if len(g.nodes) else np.zeros(0, dtype=np.int64)
        self.max_power = 1
        if len(g.nodes):
            self.max_power = max(1, int(math.floor(qmax / float(g.lengths.min()) + 1e-9)))
        use_ranges = check_ranges(g)
        self.use_ranges = use_ranges
        scaled = {}
        for m in range(1, self.max_power + 1):
            scaled[m] = based_closed_sums(g, m * logw, qmax / m, h,
                                          None if tangent is None else m * tangent, use_ranges=use_ranges,
                                          threads=threads)
        self.weights = self._classes(scaled, tangent=False)
        self.tangents = self._classes(scaled, tangent=True) if tangent is not None else None

    def _classes(self, scaled, tangent: bool) -> np.ndarray:
        memo = {}

        def prim(m, k):
            if (m, k) in memo:
                return memo[(m, k)]
            bs = scaled[m]
            table = bs.tangent if tangent else bs.weighted
            arr = table[k] / k if k in table else np.zeros(bs.nbins + 1)
            for d in range(2, k + 1):
                if k % d or m * d > self.max_power:
                    continue
                sub = prim(m * d, k // d)
                # the d-th power of a primitive class of binned length c has binned length d*c
                top = min(len(sub), bs.nbins // d + 1)
                arr[:d * top:d] -= sub[:top] / d
            memo[(m, k)] = arr
            return arr

        total = np.zeros(self.nbins + 1)
        for d in range(1, self.max_power + 1):
            for k in sorted(scaled[d].weighted):
                arr = prim(d, k)
                top = min(len(arr), self.nbins // d + 1)
                total[:d * top:d] += arr[:top]
        return total

    def bin_range(self, lo: float, hi: float):
        b0 = int(math.ceil(lo / self.h - 1e-9))
        b1 = int(math.floor(hi / self.h + 1e-9))
        return max(b0, 0), min(b1, self.nbins)

    def binned_length(self, word) -> int:
        return int(sum(self.L[i] for i in word))

    def window(self, lo: float, hi: float):
        """(weighted sum, tangent sum or None) over classes with binned period in [lo, hi]."""
        b0, b1 = self.bin_range(lo, hi)
        if b1 < b0:
            return 0.0, (0.0 if self.tangents is not None else None)
        w = float(self.weights[b0:b1 + 1].sum())
        t = float(self.tangents[b0:b1 + 1].sum()) if self.tangents is not None else None
        return w, t
