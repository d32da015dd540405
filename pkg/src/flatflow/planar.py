"""Planar helpers. Points and vectors are complex numbers."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Iso:
    """Orientation-preserving isometry z -> a*z + b with |a| = 1."""

    a: complex = 1.0 + 0.0j
    b: complex = 0.0j

    def __call__(self, z: complex) -> complex:
        return self.a * z + self.b

    def rotate(self, v: complex) -> complex:
        return self.a * v

    def __matmul__(self, other: "Iso") -> "Iso":
        # (self @ other)(z) == self(other(z))
        return Iso(self.a * other.a, self.a * other.b + self.b)

    def inverse(self) -> "Iso":
        ia = self.a.conjugate()
        return Iso(ia, -ia * self.b)

    def close_to(self, other: "Iso", tol: float = 1e-12) -> bool:
        return abs(self.a - other.a) <= tol and abs(self.b - other.b) <= tol

    @property
    def angle(self) -> float:
        return cmath.phase(self.a)


IDENTITY = Iso()


def cross(u: complex, v: complex) -> float:
    return u.real * v.imag - u.imag * v.real


def dot(u: complex, v: complex) -> float:
    return u.real * v.real + u.imag * v.imag


def ccw_angle(u: complex, v: complex) -> float:
    """Counterclockwise angle from u to v, in [0, 2pi)."""
    ang = cmath.phase(v / u)
    if ang < 0:
        ang += TWO_PI
    if ang >= TWO_PI:
        ang -= TWO_PI
    return ang


def unit(angle: float) -> complex:
    return cmath.exp(1j * angle)


def signed_area(pts) -> float:
    n = len(pts)
    return 0.5 * sum(cross(pts[i], pts[(i + 1) % n]) for i in range(n))


def ray_segment(origin: complex, d: complex, p: complex, q: complex, tol: float = 1e-12):
    """Intersection of the ray origin + t*d with segment [p, q].

    Returns (t, s) with s the segment parameter, or None for no hit or a
    parallel segment. `d` need not be unit; `t` is in units of |d|.
    """
    e = q - p
    den = cross(d, e)
    if abs(den) <= tol * abs(d) * abs(e):
        return None
    w = p - origin
    t = cross(w, e) / den
    s = cross(w, d) / den
    if s < -tol or s > 1.0 + tol:
        return None
    return t, s


def point_segment_distance(z: complex, p: complex, q: complex) -> float:
    e = q - p
    ee = dot(e, e)
    if ee == 0.0:
        return abs(z - p)
    s = min(1.0, max(0.0, dot(z - p, e) / ee))
    return abs(z - (p + s * e))


def segments_cross(p1: complex, p2: complex, q1: complex, q2: complex, tol: float = 1e-12) -> bool:
    """Proper or touching intersection of two closed segments."""
    d1 = cross(q2 - q1, p1 - q1)
    d2 = cross(q2 - q1, p2 - q1)
    d3 = cross(p2 - p1, q1 - p1)
    d4 = cross(p2 - p1, q2 - p1)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True
    for a, b, c, d in ((q1, q2, p1, d1), (q1, q2, p2, d2), (p1, p2, q1, d3), (p1, p2, q2, d4)):
        if abs(d) <= tol and point_segment_distance(c, a, b) <= tol:
            return True
    return False


def point_in_polygon(z: complex, pts, tol: float = 1e-9) -> bool:
    """Closed point-in-polygon test (boundary counts as inside)."""
    n = len(pts)
    for i in range(n):
        if point_segment_distance(z, pts[i], pts[(i + 1) % n]) <= tol:
            return True
    inside = False
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        if (a.imag > z.imag) != (b.imag > z.imag):
            x = a.real + (z.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            if x > z.real:
                inside = not inside
    return inside
