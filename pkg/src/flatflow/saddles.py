"""Saddle connections, the admissible-concatenation graph, and closed saddle paths."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ClassMismatch, ConeHit, NotFound, WorkLimitExceeded
from .surface import TOL_ANGLE, TOL_GEOM, Surface
from .tracer import STOP, ConePolicy, GeodesicPath, _turn, trace_from_cone
from .unfolding import corner_wedge, propagate


@dataclass(frozen=True)
class SaddleConnection:
    id: int
    start: int  # cone class
    end: int
    alpha: float  # outgoing angular coordinate at start
    beta: float  # angular coordinate at end of the direction pointing back along the connection
    holonomy: complex  # in the coordinates of the start corner's polygon
    length: float
    start_corner: tuple  # (poly, vertex)
    poly_lengths: tuple = ()  # ((poly, length inside), ...)

    def reversed_key(self):
        return (self.end, round(self.beta, 7), round(self.length, 7))


def _raw_connections(s: Surface, lmax: float, max_pieces: int):
    found = []
    pieces = 0
    for cls in s.cone_classes:
        for corner in cls.corners:
            origin, base, width = corner_wedge(s, corner.poly, corner.vertex)

            def on_vertex(v, cls=cls, corner=corner):
                end_cls = s.classes[s.corner_class[(v.poly, v.vertex)]]
                alpha = (corner.offset + v.rel_angle) % cls.total_angle
                if end_cls.is_cone:
                    u_plane = v.planar / abs(v.planar)
                    u_poly = v.chart.inverse().rotate(u_plane)
                    beta = s.angle_of(v.poly, v.vertex, -u_poly)
                    found.append((cls.id, alpha, end_cls.id, beta, v.planar, abs(v.planar), (corner.poly, corner.vertex)))
                else:
                    # pass straight through a marked point
                    try:
                        trace_from_cone(s, cls.id, alpha, lmax, STOP)
                    except ConeHit as hit:
                        found.append(_from_hit(s, cls.id, alpha, hit, (corner.poly, corner.vertex)))

            pieces += propagate(s, corner.poly, origin, base, width, lmax, on_vertex=on_vertex,
                                source_vertex=corner.vertex, max_pieces=max_pieces - pieces)
    return found


def _from_hit(s: Surface, start: int, alpha: float, hit: ConeHit, corner):
    last = hit.path.segments[-1]
    end_pt = last.point(last.t1)
    m = min(range(len(s.vertices[last.poly])), key=lambda i: abs(s.vertices[last.poly][i] - end_pt))
    beta = s.angle_of(last.poly, m, -last.u)
    hol = sum(seg.length * seg.chart.rotate(seg.u) for seg in hit.path.segments)
    return (start, alpha, hit.cone_class, beta, hol, hit.time, corner)


def enumerate_saddle_connections(s: Surface, lmax: float, max_pieces: int = 2_000_000, with_lengths: bool = True):
    """All directed saddle connections of length <= lmax, sorted by (length, start, angle)."""
    if lmax <= 0:
        raise ValueError("lmax must be positive")
    raw = _raw_connections(s, lmax, max_pieces)
    raw = [r for r in raw if r[5] <= lmax + TOL_GEOM]
    # identity of a connection: start class and outgoing direction; length breaks float ties
    raw.sort(key=lambda r: (r[0], r[1], r[5]))
    uniq = []
    for r in raw:
        if uniq:
            u = uniq[-1]
            total = s.classes[r[0]].total_angle
            da = abs(r[1] - u[1])
            da = min(da, total - da)
            if u[0] == r[0] and da <= 1e-9 and abs(u[5] - r[5]) <= 1e-9:
                continue
        uniq.append(r)
    if len(uniq) > 1:
        first, last = uniq[0], uniq[-1]
        total = s.classes[last[0]].total_angle
        if first[0] == last[0] and abs(first[1] + total - last[1]) <= 1e-9 and abs(first[5] - last[5]) <= 1e-9:
            uniq.pop()
    uniq.sort(key=lambda r: (round(r[5], 9), r[0], round(r[1], 9)))
    out = []
    for i, (st, alpha, en, beta, hol, length, corner) in enumerate(uniq):
        lengths = ()
        if with_lengths:
            lengths = _poly_lengths(s, st, alpha, length)
        out.append(SaddleConnection(i, st, en, alpha, beta, hol, length, corner, lengths))
    return out


def _poly_lengths(s: Surface, start: int, alpha: float, length: float):
    try:
        trace_from_cone(s, start, alpha, length + 1e-6, STOP)
    except ConeHit as hit:
        if abs(hit.time - length) > 1e-7:
            raise AssertionError(f"re-trace hit a cone at {hit.time}, expected {length}") from None
        pl = hit.path.polygon_lengths()
        return tuple(sorted(pl.items()))
    raise AssertionError("re-trace of saddle connection missed its end point")


def shortest_saddle_connection(s: Surface) -> float:
    lmax = 0.25 * min(abs(a - b) for vs in s.vertices for a, b in zip(vs, vs[1:] + vs[:1]))
    while True:
        scs = enumerate_saddle_connections(s, lmax, with_lengths=False)
        if scs:
            return scs[0].length
        lmax *= 2.0


def joint_angles(s: Surface, sc1: SaddleConnection, sc2: SaddleConnection):
    """(left, right, theta) at the joint sc1 -> sc2, without the admissibility test."""
    if sc1.end != sc2.start:
        raise ClassMismatch(f"{sc1.id} ends at class {sc1.end}, {sc2.id} starts at {sc2.start}")
    total = s.classes[sc1.end].total_angle
    left = (sc2.alpha - sc1.beta) % total
    right = total - left
    theta = left if left <= right else -right
    return left, right, theta


def admissible_concatenation(sc1: SaddleConnection, sc2: SaddleConnection, s: Surface):
    left, right, theta = joint_angles(s, sc1, sc2)
    if min(left, right) >= math.pi - TOL_ANGLE:
        return left, right, theta
    return None


@dataclass
class ConcatGraph:
    surface: Surface
    lmax: float
    nodes: list
    adj: np.ndarray  # bool [i, j]: joint i -> j admissible
    theta: np.ndarray  # signed turning angle at joint i -> j (nan where not a joint)
    singular: np.ndarray  # bool: admissible and |theta| <= pi + tol
    succ: list = field(default_factory=list)
    lengths: np.ndarray = None

    @property
    def n_edges(self) -> int:
        return int(self.adj.sum())

    def edge(self, i: int, j: int):
        if not self.adj[i, j]:
            return None
        th = float(self.theta[i, j])
        total = self.surface.classes[self.nodes[i].end].total_angle
        left = th if th >= 0 else total + th
        return left, total - left, th, bool(self.singular[i, j])


def build_concat_graph(s: Surface, lmax: float, max_pieces: int = 2_000_000, nodes=None) -> ConcatGraph:
    nodes = enumerate_saddle_connections(s, lmax, max_pieces) if nodes is None else nodes
    n = len(nodes)
    if n == 0:
        empty = np.zeros((0, 0), dtype=bool)
        return ConcatGraph(s, lmax, [], empty, np.zeros((0, 0)), empty, [], np.zeros(0))
    start = np.array([sc.start for sc in nodes])
    end = np.array([sc.end for sc in nodes])
    alpha = np.array([sc.alpha for sc in nodes])
    beta = np.array([sc.beta for sc in nodes])
    totals = np.array([s.classes[c].total_angle for c in end])
    same = end[:, None] == start[None, :]
    left = np.mod(alpha[None, :] - beta[:, None], totals[:, None])
    right = totals[:, None] - left
    adj = same & (np.minimum(left, right) >= math.pi - TOL_ANGLE)
    theta = np.where(left <= right, left, -right)
    theta = np.where(same, theta, np.nan)
    singular = adj & (np.abs(np.nan_to_num(theta)) <= math.pi + TOL_ANGLE)
    succ = [np.flatnonzero(adj[i]).tolist() for i in range(n)]
    lengths = np.array([sc.length for sc in nodes])
    return ConcatGraph(s, lmax, list(nodes), adj, theta, singular, succ, lengths)


@dataclass(frozen=True)
class ClosedGeodesic:
    word: tuple  # saddle connection ids, canonical rotation
    thetas: tuple  # theta[k] is the joint word[k] -> word[k+1]
    period: float
    regular: bool
    poly_lengths: tuple = ()  # ((poly, length inside), ...) summed over the word
    lengths: tuple = ()  # saddle connection lengths along the word

    @property
    def key(self) -> str:
        return "-".join(str(i) for i in self.word)

    @property
    def klass(self) -> str:
        return "regular" if self.regular else "singular"

    @property
    def n_steps(self) -> int:
        return len(self.word)


def canonical_rotation(word) -> tuple:
    """Lexicographically least rotation (Booth's algorithm)."""
    w = list(word)
    n = len(w)
    if n == 0:
        return ()
    s = w + w
    f = [-1] * (2 * n)
    k = 0
    for j in range(1, 2 * n):
        i = f[j - k - 1]
        while i != -1 and s[j] != s[k + i + 1]:
            if s[j] < s[k + i + 1]:
                k = j - i - 1
            i = f[i]
        if i == -1 and s[j] != s[k + i + 1]:
            if s[j] < s[k + i + 1]:
                k = j
            f[j - k] = -1
        else:
            f[j - k] = i + 1
    return tuple(s[k:k + n])


def make_closed(g: ConcatGraph, word) -> ClosedGeodesic:
    word = canonical_rotation(word)
    n = len(word)
    thetas = []
    for k in range(n):
        i, j = word[k], word[(k + 1) % n]
        if not g.adj[i, j]:
            raise ValueError(f"joint {i}->{j} is not admissible")
        thetas.append(float(g.theta[i, j]))
    regular = any(abs(t) > math.pi + TOL_ANGLE for t in thetas)
    period = float(sum(g.nodes[i].length for i in word))
    acc = {}
    for i in word:
        for poly, ln in g.nodes[i].poly_lengths:
            acc[poly] = acc.get(poly, 0.0) + ln
    return ClosedGeodesic(word, tuple(thetas), period, regular, tuple(sorted(acc.items())),
                          tuple(float(g.nodes[i].length) for i in word))


def enumerate_closed_geodesics(g: ConcatGraph, qmax: float, which: str = "all", max_steps: int = 50_000_000):
    """One representative per cyclic word with period <= qmax, sorted by (period, key).

    Each cycle is generated from its least saddle connection id, walking only
    through ids >= that root; canonical rotation removes repeated roots.
    """
    if which not in ("all", "regular", "singular"):
        raise ValueError(which)
    n = len(g.nodes)
    lengths = g.lengths
    tol = 1e-9
    succ = g.succ
    if which == "singular":
        # a singular cycle uses only singular joints
        succ = [np.flatnonzero(g.singular[i]).tolist() for i in range(n)]
    out = {}
    steps = 0
    for root in range(n):
        if lengths[root] > qmax + tol:
            break  # nodes are sorted by length; root is the least id so all later roots are longer
        # DFS over walks root -> ... -> root using ids >= root
        stack = [(root, lengths[root], [root])]
        while stack:
            node, total, path = stack.pop()
            steps += 1
            if steps > max_steps:
                raise WorkLimitExceeded("closed-walk steps", max_steps)
            for nxt in succ[node]:
                if nxt < root:
                    continue
                if nxt == root:
                    key = canonical_rotation(path)
                    if key not in out:
                        out[key] = make_closed(g, key)
                t = total + lengths[nxt]
                if t <= qmax + tol:
                    stack.append((nxt, t, path + [nxt]))
    res = [c for c in out.values() if which == "all" or c.klass == which]
    res.sort(key=lambda c: (round(c.period, 9), c.word))
    return res


def connect(g: ConcatGraph, src: int, dst: int, max_len: float):
    """Shortest admissible path (list of ids) from `src` to `dst`, both included."""
    if src == dst:
        return [src]
    lengths = g.lengths
    best = {src: lengths[src]}
    prev = {}
    heap = [(lengths[src], src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > best.get(u, math.inf):
            continue
        if u == dst:
            path = [dst]
            while path[-1] != src:
                path.append(prev[path[-1]])
            return path[::-1]
        for v in g.succ[u]:
            nd = d + lengths[v]
            if nd <= max_len + 1e-9 and nd < best.get(v, math.inf):
                best[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    raise NotFound(f"no admissible path within length {max_len}")


def path_length(g: ConcatGraph, path) -> float:
    return float(sum(g.lengths[i] for i in path))


def closed_path(g: ConcatGraph, cg: ClosedGeodesic) -> GeodesicPath:
    """The closed geodesic as a periodic GeodesicPath on [0, period).

    Time 0 is the cone point where word[0] starts; the event there is the
    joint word[-1] -> word[0].
    """
    s = g.surface
    first = g.nodes[cg.word[0]]
    last = g.nodes[cg.word[-1]]
    p = trace_from_cone(s, first.start, first.alpha, cg.period, ConePolicy.explicit(cg.thetas))
    cum = np.cumsum(cg.lengths)
    inner = [e for e in p.events if e.t < cg.period - 1e-7]
    if len(inner) != len(cg.word) - 1 or any(abs(e.t - c) > 1e-7 for e, c in zip(inner, cum[:-1])):
        raise AssertionError("traced closed geodesic does not follow its saddle connections")
    start = _turn(s, first.start, last.beta, cg.thetas[-1], 0.0)
    return GeodesicPath(p.segments, (start, *inner), 0.0, cg.period, cg.period)
