"""Visibility unfolding: propagate angular wedges from a source point through glued polygons.

The source sits at the origin of the developing plane. A wedge is an angular
interval of directions (relative to a base direction) whose rays all cross
the same sequence of polygon edges. Inside each unfolded polygon copy, the
wedge is split at the directions of visible vertices; each piece leaves
through a single edge and continues into the neighbor.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import WorkLimitExceeded
from .planar import TWO_PI, Iso, cross, point_segment_distance, ray_segment
from .surface import TOL_GEOM, Surface

ANG_TOL = 1e-11


@dataclass(frozen=True)
class VisibleVertex:
    poly: int
    vertex: int
    planar: complex  # position relative to the source
    rel_angle: float  # angle from the base direction
    chart: Iso  # polygon coordinates -> developing plane


@dataclass(frozen=True)
class WedgePiece:
    """A polygon copy crossed by the wedge [lo, hi] of directions."""

    poly: int
    chart: Iso
    lo: float
    hi: float
    closed_lo: bool
    entry_edge: int | None
    exit_edge: int


def _rel(base: float, z: complex) -> float:
    r = (cmath.phase(z) - base) % TWO_PI
    return 0.0 if r > TWO_PI - ANG_TOL else r


def _first_hit(pts, d: complex, entry_edge, skip_vertex, t_min: float):
    n = len(pts)
    best = (math.inf, None)
    for k in range(n):
        if k == entry_edge:
            continue
        if skip_vertex is not None and (k == skip_vertex or (k + 1) % n == skip_vertex):
            continue
        hit = ray_segment(0j, d, pts[k], pts[(k + 1) % n], 1e-14)
        if hit is None:
            continue
        t, _ = hit
        if t > t_min + TOL_GEOM * 1e-3 and t < best[0]:
            best = (t, k)
    return best


def _entry_param(pts, d: complex, entry_edge) -> float:
    if entry_edge is None:
        return 0.0
    n = len(pts)
    hit = ray_segment(0j, d, pts[entry_edge], pts[(entry_edge + 1) % n], 1e-9)
    return hit[0] if hit is not None else 0.0


def propagate(s: Surface, poly: int, origin: complex, base: float, width: float, radius: float,
              on_vertex=None, on_piece=None, closed_lo: bool = True, source_vertex: int | None = None,
              max_pieces: int = 2_000_000) -> int:
    """Run the wedge search; returns the number of polygon copies visited.

    `origin` is in `poly` coordinates and the initial wedge is
    ``[base, base + width)`` (closed at the low end iff `closed_lo`).
    `on_vertex(VisibleVertex)` is called for every vertex visible within
    `radius`; `on_piece(WedgePiece)` for every polygon copy crossed.
    """
    chart0 = Iso(1.0 + 0j, -origin)
    stack = [(poly, chart0, None, 0.0, width, closed_lo, source_vertex)]
    count = 0
    while stack:
        q, chart, entry, lo, hi, cl, skip_v = stack.pop()
        count += 1
        if count > max_pieces:
            raise WorkLimitExceeded("unfolding pieces", max_pieces)
        pts = [chart(v) for v in s.vertices[q]]
        n = len(pts)
        visible = []
        for m in range(n):
            if m == skip_v:
                continue
            w = pts[m]
            dist = abs(w)
            if dist <= TOL_GEOM:
                continue
            r = _rel(base, w)
            at_lo = abs(r - lo) <= ANG_TOL
            if not ((lo + ANG_TOL < r < hi - ANG_TOL) or (cl and at_lo)):
                continue
            d = w / dist
            t_in = _entry_param(pts, d, entry)
            if dist < t_in - TOL_GEOM:
                continue
            t_first, _ = _first_hit(pts, d, entry, skip_v, t_in)
            if dist <= t_first + TOL_GEOM:
                visible.append((r, dist, m, w))
        visible.sort()
        blocked_lo = False
        cuts = [lo]
        for r, dist, m, w in visible:
            if abs(r - lo) <= ANG_TOL:
                blocked_lo = True
            elif abs(r - cuts[-1]) > ANG_TOL:
                cuts.append(r)
            if on_vertex is not None and dist <= radius + TOL_GEOM:
                on_vertex(VisibleVertex(q, m, w, r, chart))
        cuts.append(hi)
        for i in range(len(cuts) - 1):
            b0, b1 = cuts[i], cuts[i + 1]
            if b1 - b0 <= ANG_TOL:
                continue
            mid = cmath.exp(1j * (base + 0.5 * (b0 + b1)))
            t_in = _entry_param(pts, mid, entry)
            t_out, k = _first_hit(pts, mid, entry, skip_v, t_in)
            if k is None:
                raise RuntimeError(f"wedge escapes polygon {q}")
            piece_closed = cl and i == 0 and not blocked_lo
            if on_piece is not None:
                on_piece(WedgePiece(q, chart, b0, b1, piece_closed, entry, k))
            if point_segment_distance(0j, pts[k], pts[(k + 1) % n]) > radius + TOL_GEOM:
                continue
            nq, nf, back = s.cross_edge(q, k)
            stack.append((nq, chart @ back, nf, b0, b1, piece_closed, None))
    return count


def corner_wedge(s: Surface, poly: int, vertex: int):
    """(origin, base angle, width) of the wedge of directions leaving a corner."""
    d_next, _ = s.corner_directions(poly, vertex)
    c = s.corner(poly, vertex)
    return s.vertices[poly][vertex], cmath.phase(d_next), c.angle
