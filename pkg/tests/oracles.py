"""Independent reference implementations used by the tests.

None of these reuse the library's unfolding, lambda or arithmetic code; they
only read the surface's polygon and gluing data.
"""
from __future__ import annotations

import cmath
import math
from fractions import Fraction

TOL = 1e-9


# ---------------------------------------------------------------------------
# saddle connections by corridor search


def _cross(u, v):
    return u.real * v.imag - u.imag * v.real


def _convex(pts):
    n = len(pts)
    return all(_cross(pts[(i + 1) % n] - pts[i], pts[(i + 2) % n] - pts[(i + 1) % n]) > 0 for i in range(n))


def _seg_param(o, d, a, b):
    """(t, u) with o + t d = a + u (b - a), or None when parallel."""
    e = b - a
    den = _cross(d, e)
    if abs(den) < 1e-15:
        return None
    w = a - o
    return _cross(w, e) / den, _cross(w, d) / den


def brute_force_saddle_connections(s, lmax: float):
    """All directed saddle connections of length <= lmax as (start, end, length, alpha).

    Each connection is found by walking edge-crossing corridors from a corner:
    the set of admissible directions is the open angular interval seen
    through every crossed edge, and a target vertex strictly inside that
    interval is joined by a straight segment that is then re-verified
    crossing by crossing. Requires convex polygons whose vertices all belong
    to cone classes.
    """
    for vs in s.vertices:
        assert _convex(vs), "oracle assumes convex polygons"
    for c in s.classes:
        assert c.is_cone, "oracle assumes every vertex is a cone point"
    out = []
    for P, vs in enumerate(s.vertices):
        n = len(vs)
        for v in range(n):
            start = s.corner_class[(P, v)]
            corner = s.corner(P, v)
            O = vs[v]
            d_lo = (vs[(v + 1) % n] - O)
            d_lo /= abs(d_lo)

            def rel(z):
                r = cmath.phase(z / d_lo)
                return r if r >= -1e-12 else r + 2 * math.pi

            def rel_near(z, mid):
                # angle in (mid - pi, mid + pi], safe for edges straddling the low boundary
                return mid + cmath.phase(z / (d_lo * cmath.exp(1j * mid)))

            # the edge leaving the corner along the low boundary direction
            e_len = abs(vs[(v + 1) % n] - O)
            if e_len <= lmax + TOL:
                out.append((start, s.corner_class[(P, (v + 1) % n)], e_len, corner.offset))
            # corridor search: (poly, map poly coords -> plane with O at 0, entry edge, lo, hi, crossed edges)
            to_plane = (1 + 0j, -O)

            def apply(m, z):
                return m[0] * z + m[1]

            stack = [(P, to_plane, None, 0.0, corner.angle, ())]
            while stack:
                Q, m, entry, lo, hi, crossed = stack.pop()
                pts = [apply(m, z) for z in s.vertices[Q]]
                k_n = len(pts)
                skip = set()
                if entry is not None:
                    skip = {entry, (entry + 1) % k_n}
                elif Q == P:
                    skip = {v, (v + 1) % n, (v - 1) % n}
                for w_i, w in enumerate(pts):
                    if w_i in skip or abs(w) > lmax + TOL:
                        continue
                    r = rel(w)
                    if not (lo + 1e-12 < r < hi - 1e-12):
                        continue
                    if _verify(w, crossed):
                        out.append((start, s.corner_class[(Q, w_i)], abs(w), corner.offset + r))
                for k in range(k_n):
                    if k == entry:
                        continue
                    a, b = pts[k], pts[(k + 1) % k_n]
                    if entry is None and (k == v or (k + 1) % k_n == v):
                        continue
                    mid = 0.5 * (lo + hi)
                    ra, rb = rel_near(a, mid), rel_near(b, mid)
                    new_lo, new_hi = max(lo, min(ra, rb)), min(hi, max(ra, rb))
                    if new_hi - new_lo <= 1e-12:
                        continue
                    if _dist_to_segment(a, b) > lmax + TOL:
                        continue
                    nq, nf = s.partner[(Q, k)]
                    back = s.glue[(nq, nf)]  # neighbor coords -> Q coords
                    nm = (m[0] * back.a, m[0] * back.b + m[1])
                    stack.append((nq, nm, nf, new_lo, new_hi, crossed + ((a, b),)))
    return out


def _dist_to_segment(a, b):
    e = b - a
    t = max(0.0, min(1.0, -(a.real * e.real + a.imag * e.imag) / (abs(e) ** 2)))
    return abs(a + t * e)


def _verify(w, crossed) -> bool:
    """The segment 0 -> w crosses each edge in order, in the edge's interior."""
    last = 0.0
    for a, b in crossed:
        hit = _seg_param(0j, w, a, b)
        if hit is None:
            return False
        t, u = hit
        if not (1e-12 < u < 1 - 1e-12 and last - 1e-12 <= t < 1 - 1e-12):
            return False
        last = t
    return True


def match_connections(found, library, tol: float = 1e-7):
    """Pair every oracle connection with a library connection; returns unmatched (oracle, library) lists."""
    pool = list(library)
    missing = []
    for st, en, ln, al in found:
        hit = None
        for i, (st2, en2, ln2, al2, total) in enumerate(pool):
            da = abs(al - al2) % total
            if st == st2 and en == en2 and abs(ln - ln2) <= tol and min(da, total - da) <= tol:
                hit = i
                break
        if hit is None:
            missing.append((st, en, ln, al))
        else:
            pool.pop(hit)
    return missing, pool


# ---------------------------------------------------------------------------
# lambda, transcribed from its definition


def lambda_literal(events, period, t, s, tol=1e-9):
    """lambda at time t on a periodic geodesic with cone events [(time, theta), ...] in one period.

    uu: next c >= t with |theta| > pi, value (|theta| - pi) / max(s, c - t).
    ss: latest c <= t with |theta| > pi, value (|theta| - pi) / max(s, t - c).
    lambda: ss if such a turn lies in (t - s, t], uu if one lies in [t, t + s),
    otherwise min(ss, uu).
    """
    k0 = math.floor(t / period) if period else 0
    turns = []
    for k in range(k0 - 2, k0 + 3):
        for c, th in events:
            if abs(th) - math.pi > tol:
                turns.append((c + k * period, abs(th) - math.pi))
    if not turns:
        return 0.0, 0.0, 0.0
    future = [x for x in turns if x[0] >= t]
    past = [x for x in turns if x[0] <= t]
    cf, ef = min(future)
    cp, ep = max(past)
    uu = ef / max(s, cf - t)
    ss = ep / max(s, t - cp)
    if any(t - s < c <= t for c, _ in turns):
        lam = ss
    elif any(t <= c < t + s for c, _ in turns):
        lam = uu
    else:
        lam = min(ss, uu)
    return lam, uu, ss


def lambda_literal_open(turns, t, s):
    """Same definition for a finite list of (time, excess) turns, no periodicity."""
    future = [x for x in turns if x[0] >= t]
    past = [x for x in turns if x[0] <= t]
    uu = (min(future)[1] / max(s, min(future)[0] - t)) if future else 0.0
    ss = (max(past)[1] / max(s, t - max(past)[0])) if past else 0.0
    if any(t - s < c <= t for c, _ in turns):
        return ss
    if any(t <= c < t + s for c, _ in turns):
        return uu
    return min(ss, uu)


# ---------------------------------------------------------------------------
# delta-dense pairs by exhaustive search


def dense_pairs(x: Fraction, y: Fraction, lo: Fraction, hi: Fraction):
    """Every (m1, m2) with m1, m2 >= 1 and lo <= m1 x + m2 y <= hi."""
    out = []
    m1 = 1
    while m1 * x + y <= hi:
        rest_lo = lo - m1 * x
        rest_hi = hi - m1 * x
        m2_lo = max(1, math.ceil(rest_lo / y))
        m2_hi = math.floor(rest_hi / y)
        for m2 in range(m2_lo, m2_hi + 1):
            out.append((m1, m2))
        m1 += 1
    return out


def integer_sandwich(x: Fraction, y: Fraction, tau: Fraction, n: int, m1: int, m2: int) -> bool:
    """tau + n d <= m1 x + m2 y <= tau + (n + 1) d, checked on integers after clearing denominators."""
    den = math.lcm(x.denominator, y.denominator, tau.denominator)
    X, Y, T = int(x * den), int(y * den), int(tau * den)
    D = X - Y
    val = m1 * X + m2 * Y
    return T + n * D <= val <= T + (n + 1) * D


# ---------------------------------------------------------------------------
# closed-geodesic distance witnesses from chains between excess turns


def witness_failures(ea_list, gap, eb_list, s, eta, radius, samples, lam=None):
    """Times t in [0, gap] where some (ea, eb) has lambda(t) > eta without a witness.

    The stretch runs from an excess turn ea at time 0 to one eb at time gap,
    with only pi-turns between. A witness is one of the two turns within
    `radius` of t with excess >= s*eta. lambda is nondecreasing in ea and eb,
    and the set of pairs lacking a witness is closed under decreasing either
    excess, so it suffices to test the largest such pair at each t.
    `lam(ea, eb, t)` defaults to the literal definition.
    """
    if lam is None:
        def lam(ea, eb, t):
            return lambda_literal_open([(0.0, ea), (gap, eb)], t, s)
    bad = []
    thr = s * eta
    for t in samples:
        near_a = t <= radius
        near_b = gap - t <= radius
        a_ok = [e for e in ea_list if (e < thr or not near_a)]
        b_ok = [e for e in eb_list if (e < thr or not near_b)]
        if not a_ok or not b_ok:
            continue
        ea, eb = max(a_ok), max(b_ok)
        value = lam(ea, eb, t)
        if value > eta:
            bad.append((t, ea, eb, value))
    return bad
