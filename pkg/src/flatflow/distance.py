"""Intrinsic distance on a flat cone surface and the weighted-integral distance between geodesics.

Shortest paths on a flat surface whose cone angles are at least 2*pi are
polygonal lines that bend only at vertices, each piece a straight segment
in some unfolding. `surface_distance` therefore runs Dijkstra over the
source, the vertex classes and the target, with edges found by visibility
unfolding bounded by the remaining budget.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

from .errors import CutoffTooLarge, NotComparable, WorkLimitExceeded
from .planar import TWO_PI, cross, point_segment_distance
from .surface import TOL_GEOM, Surface
from .tracer import GeodesicPath
from .unfolding import ANG_TOL, _entry_param, _rel, corner_wedge, propagate

MAX_PIECES = 200_000


def _poly_index(s: Surface, poly) -> int:
    return s.poly_ids.index(poly) if poly in s.poly_ids else int(poly)


def _locate(s: Surface, poly: int, z: complex):
    """('vertex', class id) or ('point', [(poly, z), ...]) listing every polygon representation."""
    vs = s.vertices[poly]
    n = len(vs)
    for m, v in enumerate(vs):
        if abs(v - z) <= TOL_GEOM:
            return "vertex", s.corner_class[(poly, m)]
    reps = [(poly, z)]
    for k in range(n):
        if point_segment_distance(z, vs[k], vs[(k + 1) % n]) <= TOL_GEOM:
            q, f = s.partner[(poly, k)]
            reps.append((q, s.glue[(poly, k)](z)))
            return "edge", (reps, (k, f))
    return "point", reps


def _visible(s: Surface, source, radius: float, targets, max_pieces: int):
    """Yield (vertex class, distance) and (None, distance) for target hits, from one source."""
    kind, data = source
    found_vertices: dict = {}
    target_best = [math.inf]

    def wedges():
        if kind == "vertex":
            for c in s.classes[data].corners:
                origin, base, width = corner_wedge(s, c.poly, c.vertex)
                yield c.poly, origin, base, width, c.vertex
        elif kind == "edge":
            reps, edges = data
            for (poly, z), edge in zip(reps, edges):
                vs = s.vertices[poly]
                n = len(vs)
                a, b = vs[edge], vs[(edge + 1) % n]
                yield poly, z, math.atan2((b - a).imag, (b - a).real), math.pi, None
        else:
            poly, z = data[0]
            yield poly, z, 0.0, TWO_PI, None

    for poly, origin, base, width, src_v in wedges():
        def on_vertex(vv, base=base):
            c = s.corner_class[(vv.poly, vv.vertex)]
            d = abs(vv.planar)
            if d < found_vertices.get(c, math.inf):
                found_vertices[c] = d

        def on_piece(pc, base=base):
            for tpoly, tz in targets:
                if tpoly != pc.poly:
                    continue
                w = pc.chart(tz)
                d = abs(w)
                if d > radius + TOL_GEOM or d >= target_best[0]:
                    continue
                if d <= TOL_GEOM:
                    target_best[0] = 0.0
                    continue
                r = _rel(base, w)
                if not (pc.lo - ANG_TOL <= r <= pc.hi + ANG_TOL):
                    continue
                pts = [pc.chart(v) for v in s.vertices[pc.poly]]
                if d < _entry_param(pts, w / d, pc.entry_edge) - TOL_GEOM:
                    continue
                target_best[0] = d

        try:
            propagate(s, poly, origin, base, width, radius, on_vertex, on_piece,
                      closed_lo=True, source_vertex=src_v, max_pieces=max_pieces)
        except WorkLimitExceeded as exc:
            raise CutoffTooLarge("distance unfolding pieces", max_pieces) from exc
    return found_vertices, target_best[0]


def surface_distance(s: Surface, p, q, cutoff: float, max_pieces: int = MAX_PIECES):
    """Exact intrinsic distance between surface points (polygon id, point) if it is at most `cutoff`, else None."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    src = _as_located(s, p)
    dst = _as_located(s, q)
    return _dijkstra(s, src, dst, cutoff, max_pieces)


def _as_located(s: Surface, pt):
    poly, z = pt
    if not isinstance(z, complex):
        z = complex(*z)
    return _locate(s, _poly_index(s, poly), z)


def _targets(dst):
    kind, data = dst
    if kind == "vertex":
        return []
    return data[0] if kind == "edge" else data


def _same(src, dst) -> bool:
    if src[0] == "vertex" or dst[0] == "vertex":
        return src[0] == dst[0] and src[1] == dst[1]
    a = _targets(src)
    return any(pa == pb and abs(za - zb) <= TOL_GEOM for pa, za in a for pb, zb in _targets(dst))


def _dijkstra(s: Surface, src, dst, cutoff: float, max_pieces: int):
    if _same(src, dst):
        return 0.0
    targets = _targets(dst)
    goal_vertex = dst[1] if dst[0] == "vertex" else None
    best = {}
    heap = [(0.0, 0, "src", src)]
    done = set()
    tie = 1
    while heap:
        d, _, key, node = heapq.heappop(heap)
        if key in done:
            continue
        done.add(key)
        if key == "dst":
            return d
        if goal_vertex is not None and key == ("v", goal_vertex):
            return d
        verts, hit = _visible(s, node, cutoff - d, targets, max_pieces)
        if hit < math.inf and d + hit <= cutoff + TOL_GEOM and d + hit < best.get("dst", math.inf):
            best["dst"] = d + hit
            heapq.heappush(heap, (d + hit, tie, "dst", None))
            tie += 1
        for c, dv in verts.items():
            nd = d + dv
            k = ("v", c)
            if nd <= cutoff + TOL_GEOM and k not in done and nd < best.get(k, math.inf):
                best[k] = nd
                heapq.heappush(heap, (nd, tie, k, ("vertex", c)))
                tie += 1
    return None


# ---------------------------------------------------------------------------
# weighted-integral distance between parametrized geodesics


def _convex(vs) -> bool:
    n = len(vs)
    return all(cross(vs[(i + 1) % n] - vs[i], vs[(i + 2) % n] - vs[(i + 1) % n]) > 0 for i in range(n))


def _short_segment(s: Surface, convex, q1, z1, q2, z2, ell0: float):
    """Exact distance when a short straight segment joins the points inside one or two convex polygons.

    The segment is the shortest path in its homotopy class (the universal
    cover is CAT(0)); any other class closes a non-contractible loop, whose
    length is at least the shortest saddle connection ell0. So a segment of
    length below ell0 / 2 is globally shortest.
    """
    if not convex[q1]:
        return None
    if q1 == q2:
        d = abs(z1 - z2)
        return d if 2 * d < ell0 else None
    vs = s.vertices[q1]
    n = len(vs)
    for k in range(n):
        if s.partner[(q1, k)][0] != q2 or not convex[q2]:
            continue
        q, f = s.partner[(q1, k)]
        w = s.glue[(q, f)](z2)  # target in q1's coordinates
        d = abs(w - z1)
        if 2 * d >= ell0 or d <= TOL_GEOM:
            continue
        a, b = vs[k], vs[(k + 1) % n]
        e, r = b - a, w - z1
        den = cross(r, e)
        if abs(den) < 1e-15:
            continue
        tt = cross(a - z1, e) / den
        uu = cross(a - z1, r) / den
        if -1e-12 <= tt <= 1 + 1e-12 and TOL_GEOM < uu < 1 - TOL_GEOM:
            return d
    return None


def _pair_distance(s: Surface, p1: GeodesicPath, p2: GeodesicPath, t: float, cutoff: float,
                   convex=None, ell0: float = 0.0) -> float:
    q1, z1, _ = p1.position(t)
    q2, z2, _ = p2.position(t)
    if q1 == q2 and abs(z1 - z2) <= TOL_GEOM:
        return 0.0
    if convex is not None:
        d = _short_segment(s, convex, q1, z1, q2, z2, ell0)
        if d is not None and d <= cutoff:
            return d
    d = _dijkstra(s, _locate(s, q1, z1), _locate(s, q2, z2), cutoff, MAX_PIECES)
    if d is None:
        raise NotComparable(f"points at t={t:.6g} are farther apart than {cutoff:.6g}")
    return d


def gs_distance_upper(p1: GeodesicPath, p2: GeodesicPath, T: float, surface: Surface,
                      cutoff: float | None = None, tol: float = 1e-6):
    """(bound, tail): quadrature of d(p1(t), p2(t)) e^{-2|t|} over [-T, T] and diam * e^{-2T}.

    The integrand uses the exact intrinsic distance, which equals the
    distance of the nearby lifts while it stays below `cutoff` (default: half
    the shortest saddle connection). Larger separations raise NotComparable.
    """
    from .surface import cone_constants

    if T <= 0:
        raise ValueError("T must be positive")
    for p in (p1, p2):
        if p.period is None and (p.a > -T + 1e-12 or p.b < T - 1e-12):
            raise NotComparable(f"path window [{p.a}, {p.b}] does not contain [-T, T]")
    ell0 = cone_constants(surface)[0]
    if cutoff is None:
        cutoff = 0.5 * ell0
    convex = [_convex(vs) for vs in surface.vertices]
    cache: dict = {}

    def f(t: float) -> float:
        if t not in cache:
            d = _pair_distance(surface, p1, p2, t, cutoff, convex, ell0)
            cache[t] = d * math.exp(-2.0 * abs(t))
        return cache[t]

    total = 0.0
    for a, b in ((-T, 0.0), (0.0, T)):
        total += _adaptive_trapezoid(f, a, b, tol / 2)
    tail = surface.diameter_bound() * math.exp(-2.0 * T)
    return total, tail


def _adaptive_trapezoid(f, a: float, b: float, tol: float, n0: int = 64, depth: int = 18) -> float:
    xs = np.linspace(a, b, n0 + 1)
    total = 0.0
    stack = [(float(xs[i]), float(xs[i + 1]), tol / n0, 0) for i in range(n0)]
    while stack:
        lo, hi, eps, lvl = stack.pop()
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = f(lo), f(mid), f(hi)
        coarse = 0.5 * (hi - lo) * (flo + fhi)
        fine = 0.25 * (hi - lo) * (flo + 2 * fmid + fhi)
        if abs(fine - coarse) <= 3 * eps or lvl >= depth:
            total += fine + (fine - coarse) / 3.0
        else:
            stack.append((lo, mid, eps / 2, lvl + 1))
            stack.append((mid, hi, eps / 2, lvl + 1))
    return total
