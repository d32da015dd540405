"""Flat cone surfaces built from Euclidean polygons with edge gluings."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import InvalidCrossing, ValidationError
from .planar import IDENTITY, TWO_PI, Iso, ccw_angle, segments_cross, signed_area

TOL_GEOM = 1e-9
TOL_ANGLE = 1e-9


@dataclass(frozen=True)
class SurfaceDescriptor:
    name: str
    polygons: tuple  # ((id, ((x, y), ...)), ...)
    gluings: tuple  # (((pid, edge), (pid, edge)), ...)

    @classmethod
    def from_dict(cls, data: dict) -> "SurfaceDescriptor":
        try:
            polys = tuple(
                (p["id"], tuple((float(x), float(y)) for x, y in p["vertices"]))
                for p in data["polygons"]
            )
            glue = tuple(
                ((g["from"][0], int(g["from"][1])), (g["to"][0], int(g["to"][1])))
                for g in data["gluings"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError("malformed descriptor", str(exc)) from exc
        return cls(str(data.get("name", "surface")), polys, glue)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "polygons": [{"id": pid, "vertices": [list(v) for v in verts]} for pid, verts in self.polygons],
            "gluings": [{"from": list(a), "to": list(b)} for a, b in self.gluings],
        }

    def scaled(self, factor: float) -> "SurfaceDescriptor":
        polys = tuple((pid, tuple((x * factor, y * factor) for x, y in verts)) for pid, verts in self.polygons)
        return SurfaceDescriptor(f"{self.name}x{factor:g}", polys, self.gluings)


def load_descriptor(path) -> SurfaceDescriptor:
    """Read a `.surf` file. Bare names like ``octagon.surf`` fall back to bundled data."""
    p = Path(path)
    if not p.exists():
        bundled = resources.files("flatflow") / "data" / p.name
        if p.parent == Path(".") and bundled.is_file():
            return SurfaceDescriptor.from_dict(json.loads(bundled.read_text(encoding="utf-8")))
        raise FileNotFoundError(str(path))
    return SurfaceDescriptor.from_dict(json.loads(p.read_text(encoding="utf-8")))


def load_surface(path) -> "Surface":
    return build_surface(load_descriptor(path))


@dataclass(frozen=True)
class Corner:
    poly: int
    vertex: int
    angle: float
    offset: float  # start of this wedge in the cone-class angular coordinate


@dataclass(frozen=True)
class ConeClass:
    id: int
    corners: tuple  # Corner, in counterclockwise order around the point
    total_angle: float

    @property
    def excess(self) -> float:
        return self.total_angle - TWO_PI

    @property
    def is_cone(self) -> bool:
        return self.excess > TOL_ANGLE


@dataclass(frozen=True)
class Chart:
    poly: int
    iso: Iso  # polygon coordinates -> developing plane
    crossings: tuple = ()


@dataclass
class Surface:
    name: str
    poly_ids: list
    vertices: list  # list of list[complex], counterclockwise
    partner: dict  # (poly, edge) -> (poly, edge)
    glue: dict  # (poly, edge) -> Iso from this polygon's coords into the partner's
    classes: list
    genus: int
    corner_class: dict = field(default_factory=dict)  # (poly, vertex) -> class id
    corner_index: dict = field(default_factory=dict)  # (poly, vertex) -> position in class.corners

    @property
    def cone_classes(self):
        return [c for c in self.classes if c.is_cone]

    @property
    def n_polys(self) -> int:
        return len(self.vertices)

    def edge(self, poly: int, k: int):
        vs = self.vertices[poly]
        return vs[k], vs[(k + 1) % len(vs)]

    def corner(self, poly: int, vertex: int) -> Corner:
        cls = self.classes[self.corner_class[(poly, vertex)]]
        return cls.corners[self.corner_index[(poly, vertex)]]

    def corner_directions(self, poly: int, vertex: int):
        """(direction along the outgoing edge, direction along the incoming edge reversed)."""
        vs = self.vertices[poly]
        n = len(vs)
        v = vs[vertex]
        a, b = vs[(vertex + 1) % n] - v, vs[(vertex - 1) % n] - v
        return a / abs(a), b / abs(b)

    def locate_angle(self, class_id: int, alpha: float):
        """Corner and planar unit direction for angular coordinate `alpha` at a vertex class."""
        cls = self.classes[class_id]
        alpha = alpha % cls.total_angle
        chosen = cls.corners[-1]
        for c in cls.corners:
            if alpha < c.offset + c.angle - TOL_ANGLE * 1e-3:
                chosen = c
                break
        rel = min(max(alpha - chosen.offset, 0.0), chosen.angle)
        d_next, _ = self.corner_directions(chosen.poly, chosen.vertex)
        return chosen, d_next * complex(math.cos(rel), math.sin(rel))

    def angle_of(self, poly: int, vertex: int, direction: complex) -> float:
        """Angular coordinate at a vertex class of a planar direction pointing into `poly`."""
        c = self.corner(poly, vertex)
        d_next, _ = self.corner_directions(poly, vertex)
        rel = ccw_angle(d_next, direction)
        if rel > c.angle:
            # numerical wrap: only slightly negative angles land here
            rel = 0.0 if rel > 0.5 * (c.angle + TWO_PI) else c.angle
        total = self.classes[self.corner_class[(poly, vertex)]].total_angle
        return (c.offset + rel) % total

    def cross_edge(self, poly: int, edge: int):
        """(neighbor polygon, neighbor edge, iso from neighbor coords back into `poly` coords)."""
        q, f = self.partner[(poly, edge)]
        return q, f, self.glue[(q, f)]

    def area(self) -> float:
        return sum(signed_area(vs) for vs in self.vertices)

    def diameter_bound(self) -> float:
        """Upper bound for the intrinsic diameter: sum of polygon diameters."""
        total = 0.0
        for vs in self.vertices:
            total += max(abs(a - b) for a in vs for b in vs)
        return total


def _is_simple(pts) -> bool:
    n = len(pts)
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if segments_cross(a1, a2, pts[j], pts[(j + 1) % n], 1e-12):
                return False
    return True


def build_surface(desc: SurfaceDescriptor) -> Surface:
    """Validate a descriptor and assemble the surface with its vertex classes."""
    if not desc.polygons:
        raise ValidationError("no polygons")
    ids = [pid for pid, _ in desc.polygons]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate polygon id")
    index = {pid: i for i, pid in enumerate(ids)}
    verts = []
    for pid, vs in desc.polygons:
        pts = [complex(x, y) for x, y in vs]
        if len(pts) < 3:
            raise ValidationError("non-simple polygon", f"polygon {pid} has fewer than 3 vertices")
        if any(abs(pts[i] - pts[(i + 1) % len(pts)]) <= TOL_GEOM for i in range(len(pts))):
            raise ValidationError("non-simple polygon", f"polygon {pid} has a degenerate edge")
        if signed_area(pts) <= 0:
            raise ValidationError("non-simple polygon", f"polygon {pid} is not counterclockwise")
        if not _is_simple(pts):
            raise ValidationError("non-simple polygon", f"polygon {pid} self-intersects")
        verts.append(pts)

    partner = {}
    for ref_a, ref_b in desc.gluings:
        refs = []
        for pid, e in (ref_a, ref_b):
            if pid not in index:
                raise ValidationError("unglued edge", f"unknown polygon {pid}")
            p = index[pid]
            if not 0 <= e < len(verts[p]):
                raise ValidationError("unglued edge", f"edge {e} out of range on polygon {pid}")
            refs.append((p, e))
        a, b = refs
        if a == b:
            raise ValidationError("unglued edge", f"edge {ref_a} glued to itself")
        if a in partner or b in partner:
            raise ValidationError("unglued edge", f"edge glued twice: {ref_a} / {ref_b}")
        partner[a] = b
        partner[b] = a
    for p, vs in enumerate(verts):
        for e in range(len(vs)):
            if (p, e) not in partner:
                raise ValidationError("unglued edge", f"polygon {ids[p]} edge {e}")

    glue = {}
    for (p, e), (q, f) in partner.items():
        v0, v1 = verts[p][e], verts[p][(e + 1) % len(verts[p])]
        w0, w1 = verts[q][f], verts[q][(f + 1) % len(verts[q])]
        if abs(abs(v1 - v0) - abs(w1 - w0)) > TOL_GEOM:
            raise ValidationError(
                "edge length mismatch", f"{ids[p]}:{e} ({abs(v1 - v0):.12g}) vs {ids[q]}:{f} ({abs(w1 - w0):.12g})"
            )
        a = (w0 - w1) / (v1 - v0)
        a /= abs(a)
        # v0 -> w1, v1 -> w0
        glue[(p, e)] = Iso(a, w1 - a * v0)

    # corner walk: next corner counterclockwise from (p, k) sits across edge k-1
    angles = {}
    for p, vs in enumerate(verts):
        n = len(vs)
        for k in range(n):
            d_next = vs[(k + 1) % n] - vs[k]
            d_prev = vs[(k - 1) % n] - vs[k]
            angles[(p, k)] = ccw_angle(d_next, d_prev)
    seen = set()
    classes = []
    corner_class, corner_index = {}, {}
    for start in sorted(angles):
        if start in seen:
            continue
        corners = []
        cur = start
        offset = 0.0
        while cur not in seen:
            seen.add(cur)
            corner_class[cur] = len(classes)
            corner_index[cur] = len(corners)
            corners.append(Corner(cur[0], cur[1], angles[cur], offset))
            offset += angles[cur]
            p, k = cur
            q, f = partner[(p, (k - 1) % len(verts[p]))]
            cur = (q, f)
        if cur != start:
            raise ValidationError("non-simple polygon", "corner walk did not close")
        classes.append(ConeClass(len(classes), tuple(corners), offset))

    for c in classes:
        if c.total_angle < TWO_PI - TOL_GEOM:
            raise ValidationError("angle < 2pi", f"vertex class {c.id} has total angle {c.total_angle:.12g}")
        # exact 2pi (to rounding) is a marked regular point; anything else within tol is ambiguous
        if 1e-12 < abs(c.total_angle - TWO_PI) <= TOL_ANGLE:
            raise ValidationError("angle < 2pi", f"vertex class {c.id} angle within tolerance of 2pi")
    if not any(c.is_cone for c in classes):
        raise ValidationError("no cone points")

    total_excess = sum(c.excess for c in classes)
    g_float = (total_excess / TWO_PI + 2.0) / 2.0
    genus = round(g_float)
    if abs(total_excess - TWO_PI * (2 * genus - 2)) > 1e-9 * max(1.0, len(angles)):
        raise ValidationError("angle < 2pi", f"Gauss-Bonnet fails: total excess {total_excess}")
    n_edges = len(partner) // 2
    if len(classes) - n_edges + len(verts) != 2 - 2 * genus:
        raise ValidationError("non-simple polygon", "Euler characteristic disagrees with Gauss-Bonnet")

    return Surface(desc.name, ids, verts, partner, glue, classes, genus, corner_class, corner_index)


def gauss_bonnet_residual(s: Surface) -> float:
    return abs(sum(c.excess for c in s.classes) - TWO_PI * (2 * s.genus - 2))


def cone_constants(s: Surface):
    """(ell0, eta0, theta0): shortest saddle connection, min and max cone excess."""
    from .saddles import shortest_saddle_connection

    excesses = [c.excess for c in s.cone_classes]
    return shortest_saddle_connection(s), min(excesses), max(excesses)


def develop(s: Surface, seed, crossings) -> list:
    """Charts for every prefix of an edge-crossing walk, starting from `seed = (poly, iso)`."""
    poly, iso = seed
    chart = Chart(poly, iso, ())
    out = [chart]
    for e in crossings:
        if not 0 <= e < len(s.vertices[chart.poly]):
            raise InvalidCrossing(f"edge {e} is not on polygon {chart.poly}")
        q, f, back = s.cross_edge(chart.poly, e)
        chart = Chart(q, chart.iso @ back, chart.crossings + (e,))
        out.append(chart)
    return out


def seed_chart(poly: int = 0) -> tuple:
    return (poly, IDENTITY)
