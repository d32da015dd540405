"""Unit-speed geodesics across polygon charts, with turning angles at cone points."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace

from .errors import ConeHit, DegenerateStart, InvalidTurn, WindowExceeded
from .planar import IDENTITY, TWO_PI, Iso, cross, dot, point_in_polygon, point_segment_distance, ray_segment
from .surface import TOL_ANGLE, TOL_GEOM, Surface

MAX_STEPS = 10_000_000


@dataclass(frozen=True)
class Segment:
    t0: float
    t1: float
    poly: int
    z0: complex  # position at t0, polygon coordinates
    u: complex  # unit direction, polygon coordinates
    chart: Iso = IDENTITY  # polygon coordinates -> developing plane

    @property
    def length(self) -> float:
        return self.t1 - self.t0

    def point(self, t: float) -> complex:
        return self.z0 + (t - self.t0) * self.u

    def planar(self, t: float) -> complex:
        return self.chart(self.point(t))


@dataclass(frozen=True)
class ConeEvent:
    t: float
    cone: int
    left: float  # counterclockwise sweep from the incoming direction to the outgoing one
    right: float
    theta: float
    alpha_in: float = 0.0  # angular coordinate of the backward direction
    alpha_out: float = 0.0

    @property
    def excess_turn(self) -> float:
        return abs(self.theta) - math.pi


def signed_turn(left: float, right: float) -> float:
    return left if left <= right else -right


@dataclass(frozen=True)
class ConePolicy:
    """What to do at a cone point: stop, turn by +-pi, bisect, or consume explicit angles."""

    kind: str
    angles: tuple = ()

    def __post_init__(self):
        if self.kind not in ("stop", "+pi", "-pi", "bisect", "explicit"):
            raise ValueError(f"unknown cone policy {self.kind!r}")

    @classmethod
    def explicit(cls, angles) -> "ConePolicy":
        return cls("explicit", tuple(float(a) for a in angles))

    @classmethod
    def parse(cls, text: str) -> "ConePolicy":
        if text.startswith("angles:"):
            return cls.explicit(float(a) for a in text[len("angles:"):].split(",") if a.strip())
        return cls({"stop": "stop", "+pi": "+pi", "-pi": "-pi", "bisect": "bisect"}[text])

    def mirrored(self) -> "ConePolicy":
        """Policy for tracing the time-reversed geodesic."""
        if self.kind == "+pi":
            return ConePolicy("-pi")
        if self.kind == "-pi":
            return ConePolicy("+pi")
        if self.kind == "explicit":
            return ConePolicy.explicit(-a for a in reversed(self.angles))
        return self


STOP = ConePolicy("stop")
PLUS_PI = ConePolicy("+pi")
MINUS_PI = ConePolicy("-pi")
BISECT = ConePolicy("bisect")


@dataclass(frozen=True)
class GeodesicPath:
    segments: tuple
    events: tuple
    a: float
    b: float
    period: float | None = None
    _starts: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self._starts:
            object.__setattr__(self, "_starts", tuple(s.t0 for s in self.segments))

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def is_closed(self) -> bool:
        return self.period is not None

    def _wrap(self, t: float) -> float:
        if self.period is None:
            if t < self.a - 1e-12 or t > self.b + 1e-12:
                raise WindowExceeded(f"t={t} outside [{self.a}, {self.b}]")
            return min(max(t, self.a), self.b)
        return self.a + (t - self.a) % self.period

    def segment_at(self, t: float) -> Segment:
        t = self._wrap(t)
        i = bisect.bisect_right(self._starts, t) - 1
        return self.segments[max(0, min(i, len(self.segments) - 1))]

    def position(self, t: float):
        """(polygon, point, direction) at time t."""
        tw = self._wrap(t)
        seg = self.segment_at(tw)
        return seg.poly, seg.point(tw), seg.u

    def planar(self, t: float) -> complex:
        tw = self._wrap(t)
        return self.segment_at(tw).planar(tw)

    def events_between(self, lo: float, hi: float):
        """Cone events with lo <= t <= hi, unrolled over periods for closed paths."""
        if self.period is None:
            return [e for e in self.events if lo - 1e-12 <= e.t <= hi + 1e-12]
        out = []
        if not self.events:
            return out
        k0 = math.floor((lo - self.a) / self.period) - 1
        k1 = math.floor((hi - self.a) / self.period) + 1
        for k in range(k0, k1 + 1):
            shift = k * self.period
            for e in self.events:
                t = e.t + shift
                if lo - 1e-12 <= t <= hi + 1e-12:
                    out.append(replace(e, t=t))
        return out

    def polygon_lengths(self, lo: float | None = None, hi: float | None = None) -> dict:
        """Length spent in each polygon over [lo, hi] (default: the stored window)."""
        lo = self.a if lo is None else lo
        hi = self.b if hi is None else hi
        out: dict = {}
        if self.period is None:
            for s in self.segments:
                w = min(s.t1, hi) - max(s.t0, lo)
                if w > 0:
                    out[s.poly] = out.get(s.poly, 0.0) + w
            return out
        k0 = math.floor((lo - self.a) / self.period)
        k1 = math.floor((hi - self.a) / self.period)
        for k in range(k0, k1 + 1):
            shift = k * self.period
            for s in self.segments:
                w = min(s.t1 + shift, hi) - max(s.t0 + shift, lo)
                if w > 0:
                    out[s.poly] = out.get(s.poly, 0.0) + w
        return out


def turning_signature(p: GeodesicPath):
    return [(e.t, e.theta) for e in p.events]


class _AngleSource:
    def __init__(self, policy: ConePolicy):
        self.policy = policy
        self._it = iter(policy.angles)

    def next(self, total: float, t: float, cone: int) -> float:
        kind = self.policy.kind
        if kind == "stop":
            raise AssertionError("stop policy has no turn")
        if kind == "+pi":
            return math.pi
        if kind == "-pi":
            return -math.pi
        if kind == "bisect":
            return 0.5 * total
        try:
            theta = next(self._it)
        except StopIteration:
            raise InvalidTurn(f"explicit angle list exhausted at t={t:.12g}") from None
        if not (math.pi - TOL_ANGLE <= abs(theta) <= 0.5 * total + TOL_ANGLE):
            raise InvalidTurn(f"turn {theta} outside [pi, {0.5 * total}] at cone {cone}")
        return theta


def _turn(s: Surface, cone: int, alpha_in: float, theta: float, t: float) -> ConeEvent:
    total = s.classes[cone].total_angle
    left = theta % total
    right = total - left
    return ConeEvent(t, cone, left, right, signed_turn(left, right), alpha_in % total, (alpha_in + theta) % total)


def _corner_walk_chart(s: Surface, poly: int, vertex: int, target, chart: Iso) -> Iso:
    """Compose gluings counterclockwise around a vertex from (poly, vertex) to `target`."""
    cur = (poly, vertex)
    n_corners = len(s.classes[s.corner_class[cur]].corners)
    for _ in range(n_corners + 1):
        if cur == target:
            return chart
        p, k = cur
        q, f, back = s.cross_edge(p, (k - 1) % len(s.vertices[p]))
        chart = chart @ back
        cur = (q, f)
    raise AssertionError("corner walk did not reach target corner")


def _next_hit(s: Surface, poly: int, z: complex, u: complex, entry_edge, at_vertex):
    """First boundary event along the ray: ('edge', t, k) or ('vertex', t, m)."""
    vs = s.vertices[poly]
    n = len(vs)
    eps = 1e-12
    best_t, best_k = math.inf, None
    for k in range(n):
        if k == entry_edge:
            continue
        if at_vertex is not None and (k == at_vertex or (k + 1) % n == at_vertex):
            continue
        hit = ray_segment(z, u, vs[k], vs[(k + 1) % n], 1e-14)
        if hit is None:
            continue
        t, _ = hit
        if eps < t < best_t:
            best_t, best_k = t, k
    best_v, best_vt = None, math.inf
    for m in range(n):
        if m == at_vertex:
            continue
        w = vs[m] - z
        tau = dot(w, u)
        if tau <= eps:
            continue
        if abs(cross(u, w)) <= TOL_GEOM and tau < best_vt:
            best_v, best_vt = m, tau
    if best_v is not None and best_vt <= best_t + TOL_GEOM:
        return "vertex", best_vt, best_v
    if best_k is None:
        raise RuntimeError(f"ray from {z} along {u} escapes polygon {poly}")
    return "edge", best_t, best_k


def _trace_from(s: Surface, poly, z, u, chart, entry_edge, at_vertex, length, policy, t_start=0.0,
                first_event=None):
    src = _AngleSource(policy)
    segments, events = [], []
    if first_event is not None:
        events.append(first_event)
    t = t_start
    end = t_start + length
    steps = 0
    while True:
        steps += 1
        if steps > MAX_STEPS:
            raise RuntimeError("trace step limit reached")
        kind, tau, idx = _next_hit(s, poly, z, u, entry_edge, at_vertex)
        remaining = end - t
        if kind == "edge" and tau >= remaining:
            segments.append(Segment(t, end, poly, z, u, chart))
            break
        if kind == "vertex" and tau > remaining + TOL_GEOM:
            segments.append(Segment(t, end, poly, z, u, chart))
            break
        step = min(tau, remaining) if kind == "vertex" else tau
        segments.append(Segment(t, t + step, poly, z, u, chart))
        t_hit = t + step
        if kind == "edge":
            q, f = s.partner[(poly, idx)]
            g = s.glue[(poly, idx)]
            chart = chart @ s.glue[(q, f)]
            z, u = g(z + tau * u), g.rotate(u)
            u /= abs(u)
            poly, entry_edge, at_vertex = q, f, None
            t = t_hit
            continue
        # vertex
        m = idx
        cls_id = s.corner_class[(poly, m)]
        cls = s.classes[cls_id]
        alpha_in = s.angle_of(poly, m, -u)
        if cls.is_cone:
            if policy.kind == "stop":
                path = GeodesicPath(tuple(segments), tuple(events), t_start, t_hit)
                raise ConeHit(t_hit, cls_id, path)
            theta = src.next(cls.total_angle, t_hit, cls_id)
            ev = _turn(s, cls_id, alpha_in, theta, t_hit)
            events.append(ev)
            alpha_out = ev.alpha_out
        else:
            alpha_out = (alpha_in + math.pi) % cls.total_angle
        corner, d = s.locate_angle(cls_id, alpha_out)
        chart = _corner_walk_chart(s, poly, m, (corner.poly, corner.vertex), chart)
        poly, z, u = corner.poly, s.vertices[corner.poly][corner.vertex], d
        entry_edge, at_vertex = None, corner.vertex
        t = t_hit
        if t >= end - 1e-15:
            break
    return GeodesicPath(tuple(segments), tuple(events), t_start, end)


def _resolve_start(s: Surface, start):
    poly_id, point, direction = start
    poly = s.poly_ids.index(poly_id) if poly_id in s.poly_ids else int(poly_id)
    z = complex(*point) if not isinstance(point, complex) else point
    u = complex(math.cos(direction), math.sin(direction)) if not isinstance(direction, complex) else direction
    u /= abs(u)
    return poly, z, u


def trace(s: Surface, start, length: float, policy: ConePolicy = STOP, backward: float = 0.0) -> GeodesicPath:
    """Trace a unit-speed geodesic.

    `start` is ``(polygon id, (x, y), direction)`` with the direction in radians
    (or as a complex unit vector). With ``backward > 0`` the window becomes
    ``[-backward, length]``; the backward half uses the mirrored policy.
    """
    if length < 0 or backward < 0:
        raise ValueError("lengths must be nonnegative")
    poly, z, u = _resolve_start(s, start)
    vs = s.vertices[poly]
    if not point_in_polygon(z, vs, TOL_GEOM):
        raise ValueError(f"start point {z} not in polygon {s.poly_ids[poly]}")
    near = [m for m, v in enumerate(vs) if abs(v - z) <= TOL_GEOM]
    entry_edge = None
    at_vertex = None
    first_event = None
    if near:
        m = near[0]
        cls_id = s.corner_class[(poly, m)]
        cls = s.classes[cls_id]
        z = vs[m]
        alpha_out = s.angle_of(poly, m, u)
        corner, u = s.locate_angle(cls_id, alpha_out)
        chart = _corner_walk_chart(s, poly, m, (corner.poly, corner.vertex), IDENTITY)
        poly, z, at_vertex = corner.poly, s.vertices[corner.poly][corner.vertex], corner.vertex
        if cls.is_cone:
            if policy.kind != "explicit" or not policy.angles:
                raise DegenerateStart("start at a cone point needs an explicit first angle")
            theta = policy.angles[0]
            if not (math.pi - TOL_ANGLE <= abs(theta) <= 0.5 * cls.total_angle + TOL_ANGLE):
                raise InvalidTurn(f"turn {theta} outside [pi, {0.5 * cls.total_angle}]")
            first_event = _turn(s, cls_id, alpha_out - theta, theta, 0.0)
            policy = ConePolicy.explicit(policy.angles[1:])
        fwd = _trace_from(s, poly, z, u, chart, None, at_vertex, length, policy, first_event=first_event)
    else:
        chart = IDENTITY
        for k in range(len(vs)):
            a, b = vs[k], vs[(k + 1) % len(vs)]
            if point_segment_distance(z, a, b) <= TOL_GEOM:
                if cross(b - a, u) < 0:
                    q, f = s.partner[(poly, k)]
                    g = s.glue[(poly, k)]
                    chart = chart @ s.glue[(q, f)]
                    poly, z, u = q, g(z), g.rotate(u)
                    entry_edge = f
                else:
                    entry_edge = k
                break
        fwd = _trace_from(s, poly, z, u, chart, entry_edge, None, length, policy)
    if backward <= 0:
        return fwd
    back_policy = policy.mirrored() if policy.kind != "explicit" else ConePolicy("stop")
    p0, z0, u0 = _resolve_start(s, start)
    if first_event is not None:
        # the backward ray leaves the cone point along the incoming direction
        rev = _trace_cone_start(s, first_event.cone, first_event.alpha_in, backward, back_policy)
    else:
        rev = trace(s, (s.poly_ids[p0], z0, -u0), backward, back_policy)
    return join(reverse_path(rev), fwd)


def _trace_cone_start(s: Surface, cone: int, alpha: float, length: float, policy: ConePolicy) -> GeodesicPath:
    corner, u = s.locate_angle(cone, alpha)
    z = s.vertices[corner.poly][corner.vertex]
    return _trace_from(s, corner.poly, z, u, IDENTITY, None, corner.vertex, length, policy)


def trace_from_cone(s: Surface, cone: int, alpha: float, length: float, policy: ConePolicy = STOP) -> GeodesicPath:
    """Trace leaving a vertex class at angular coordinate `alpha`, without a start event."""
    return _trace_cone_start(s, cone, alpha, length, policy)


def reverse_path(p: GeodesicPath) -> GeodesicPath:
    segs = tuple(
        Segment(-s.t1, -s.t0, s.poly, s.point(s.t1), -s.u, s.chart) for s in reversed(p.segments)
    )
    evs = tuple(
        replace(e, t=-e.t, left=e.right, right=e.left, theta=signed_turn(e.right, e.left),
                alpha_in=e.alpha_out, alpha_out=e.alpha_in)
        for e in reversed(p.events)
    )
    return GeodesicPath(segs, evs, -p.b, -p.a, p.period)


def join(first: GeodesicPath, second: GeodesicPath) -> GeodesicPath:
    """Concatenate paths with first.b == second.a (events at the seam are merged)."""
    if abs(first.b - second.a) > 1e-9:
        raise ValueError("paths do not meet")
    evs = list(first.events)
    for e in second.events:
        if evs and abs(evs[-1].t - e.t) <= 1e-12:
            continue
        evs.append(e)
    return GeodesicPath(first.segments + second.segments, tuple(evs), first.a, second.b)


def flow_shift(p: GeodesicPath, s: float) -> GeodesicPath:
    """The geodesic t -> p(t + s), on the correspondingly shifted window."""
    if s == 0:
        return p
    if p.period is not None:
        # keep the canonical window [a, a + period)
        segs, evs = _rotate_closed(p, s)
        return GeodesicPath(segs, evs, p.a, p.b, p.period)
    segs = tuple(replace(x, t0=x.t0 - s, t1=x.t1 - s, z0=x.z0) for x in p.segments)
    evs = tuple(replace(e, t=e.t - s) for e in p.events)
    return GeodesicPath(segs, evs, p.a - s, p.b - s)


def _rotate_closed(p: GeodesicPath, s: float):
    per = p.period
    cut = p.a + (s % per)
    segs = []
    for k in (0, 1):
        shift = k * per
        for x in p.segments:
            lo, hi = max(x.t0 + shift, cut), min(x.t1 + shift, cut + per)
            if hi - lo > 1e-15:
                z = x.z0 + (lo - (x.t0 + shift)) * x.u
                segs.append(Segment(lo - cut + p.a, hi - cut + p.a, x.poly, z, x.u, x.chart))
    evs = []
    for e in p.events:
        t = e.t - (s % per)
        if t < p.a - 1e-12:
            t += per
        if t >= p.a + per - 1e-12:
            t -= per
        evs.append(replace(e, t=t))
    evs.sort(key=lambda e: e.t)
    return tuple(segs), tuple(evs)


def classify_window(p: GeodesicPath, tol: float = TOL_ANGLE):
    """('regular', t) at the first turn with |theta| > pi + tol, else ('singular_so_far', None)."""
    for e in p.events:
        if abs(e.theta) > math.pi + tol:
            return "regular", e.t
    return "singular_so_far", None


def is_straight(p: GeodesicPath, tol: float = 1e-6) -> float:
    """Max deviation of developed segment endpoints from the line through the start.

    Meaningful only for paths without cone events.
    """
    pts = []
    for seg in p.segments:
        pts.append(seg.planar(seg.t0))
        pts.append(seg.planar(seg.t1))
    if len(pts) < 2:
        return 0.0
    o = pts[0]
    d = pts[-1] - o
    if abs(d) == 0:
        return 0.0
    d /= abs(d)
    return max(abs(cross(d, q - o)) for q in pts)
