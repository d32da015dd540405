"""Specification constructions: saddle-path normalization, connectors, gluing and periodic approximation.

A good orbit segment is trimmed to its first and last excess-turn cone events.
Between those events it is a saddle connection path, which is copied verbatim
into the output. Consecutive copies are joined by connectors from the
concatenation graph, lengthened by loops around two closed geodesics whose
periods differ by a small amount so that transition times can be tuned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConnectorNotFound, Infeasible, NotFound, NotFoundWithinBudget, NotInG, TauTooSmall
from .lambdas import LambdaConfig, in_G_eta
from .saddles import ClosedGeodesic, ConcatGraph, closed_path, connect, enumerate_closed_geodesics, make_closed
from .surface import TOL_ANGLE, Surface, cone_constants
from .tracer import GeodesicPath, flow_shift


# ---------------------------------------------------------------------------
# arithmetic


def fan_bound(s_or_eta0) -> int:
    """N = floor(4 pi / eta0) + 3."""
    eta0 = s_or_eta0
    if isinstance(s_or_eta0, Surface):
        eta0 = min(c.excess for c in s_or_eta0.cone_classes)
    return int(math.floor(4 * math.pi / eta0 + 1e-12)) + 3


@dataclass(frozen=True)
class DenseCoeffs:
    m1: int
    m2: int
    C: int
    T: Fraction
    k1: int
    k2: int

    def __iter__(self):
        return iter((self.m1, self.m2))


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def delta_dense_coeffs(x, y, tau, n: int = 0) -> DenseCoeffs:
    """Positive (m1, m2) with tau + n*d <= m1*x + m2*y <= tau + (n+1)*d, where d = x - y.

    Inputs may be ints, floats or Fractions; floats are taken at their exact
    binary value so the sandwich holds exactly.
    """
    x, y, tau = _exact(x), _exact(y), _exact(tau)
    if not (x > y > 0):
        raise ValueError("need x > y > 0")
    if n < 0:
        raise ValueError("n must be nonnegative")
    d = x - y
    C = math.floor(y / d + 2) + 1
    T = max(C * y, Fraction(1))
    if tau < T:
        raise TauTooSmall(T)
    target = tau + n * d
    k1 = math.floor(target / y)
    rest = target - k1 * y
    k2 = max(1, math.ceil(rest / d))
    m1, m2 = k2, k1 - k2
    value = m1 * x + m2 * y
    if not (m1 > 0 and m2 > 0 and target <= value <= target + d):
        raise AssertionError("delta-dense construction failed")
    return DenseCoeffs(m1, m2, C, T, k1, k2)


# ---------------------------------------------------------------------------
# saddle paths from traced segments


@dataclass(frozen=True)
class SaddlePath:
    word: tuple  # saddle connection ids
    s0: float  # time in the source segment where the saddle path starts
    s1: float  # time where it ends
    shadow: float  # certified d_GS-type closeness at the middle of the copied window

    @property
    def length(self) -> float:
        return self.s1 - self.s0


def _lookup(g: ConcatGraph, start: int, alpha: float, length: float, tol: float = 1e-7) -> int:
    for i, sc in enumerate(g.nodes):
        if sc.length > length + tol:
            break
        if sc.start != start or abs(sc.length - length) > tol:
            continue
        total = g.surface.classes[start].total_angle
        da = abs(sc.alpha - alpha) % total
        if min(da, total - da) <= tol:
            return i
    raise ConnectorNotFound(f"saddle connection (class {start}, angle {alpha:.6f}, length {length:.6f}) "
                            f"not in graph (Lmax = {g.lmax})")


def _events(p: GeodesicPath, lo: float, hi: float):
    return p.events_between(lo, hi) if p.period is not None else [e for e in p.events if lo - 1e-12 <= e.t <= hi + 1e-12]


def extend_to_saddle_path(p: GeodesicPath, t: float, delta: float, cfg: LambdaConfig, g: ConcatGraph,
                          check_good: bool = True) -> SaddlePath:
    """Trim the segment [0, t] of `p` to its outermost excess-turn cone events.

    The trimmed middle is a saddle connection path and coincides with p
    exactly; `shadow` is e^{-(s1 - s0)}, the exponential-closeness bound at
    its midpoint, and must not exceed delta.
    """
    if check_good and not in_G_eta(p, t, cfg):
        raise NotInG(None, "segment is not in G(eta)")
    evs = _events(p, 0.0, t)
    exc = [e for e in evs if abs(e.theta) > math.pi + TOL_ANGLE]
    if len(exc) < 2:
        raise ConnectorNotFound("segment has fewer than two excess turns")
    c1, c2 = exc[0].t, exc[-1].t
    inner = [e for e in evs if c1 - 1e-12 <= e.t <= c2 + 1e-12]
    word = []
    for e, f in zip(inner, inner[1:]):
        word.append(_lookup(g, e.cone, e.alpha_out, f.t - e.t))
    shadow = math.exp(-(c2 - c1))
    if shadow > delta:
        raise ConnectorNotFound(f"copied window of length {c2 - c1:.4f} certifies only {shadow:.3g} > delta")
    return SaddlePath(tuple(word), c1, c2, shadow)


# ---------------------------------------------------------------------------
# similar lengths and connectors


def similar_length_pair(g: ConcatGraph, delta: float, qmax: float, closed=None):
    """First two closed geodesics (by period) whose periods differ by a gap in (0, delta)."""
    closed = enumerate_closed_geodesics(g, qmax) if closed is None else closed
    reps = []
    for c in closed:
        if not reps or c.period - reps[-1].period > 1e-9:
            reps.append(c)
    for a, b in zip(reps, reps[1:]):
        if 1e-9 < b.period - a.period < delta:
            return a, b
    raise NotFoundWithinBudget(qmax)


def loop_pair(g: ConcatGraph, window: float, qmax: float, closed=None):
    """(longer, shorter) closed geodesics with 0 < gap <= window minimizing the delta-dense threshold."""
    closed = enumerate_closed_geodesics(g, qmax) if closed is None else closed
    reps = []
    for c in closed:
        if not reps or c.period - reps[-1].period > 1e-9:
            reps.append(c)
    best = None
    for i, b in enumerate(reps):
        for a in reps[:i]:
            gap = b.period - a.period
            if not (1e-9 < gap <= window):
                continue
            T = max((math.floor(a.period / gap + 2) + 1) * a.period, 1.0)
            if best is None or T < best[0]:
                best = (T, b, a)
    if best is None:
        raise NotFoundWithinBudget(qmax)
    return best[1], best[2]


@dataclass(frozen=True)
class Connector:
    path: tuple  # saddle connection ids, first = from, last = to
    length: float
    k1: int = 0
    k2: int = 0
    base_length: float = 0.0
    threshold: float = 0.0


def _rotated_loop(loop: ClosedGeodesic, node: int):
    w = list(loop.word)
    i = w.index(node)
    return w[i + 1:] + w[:i + 1]  # continues after `node` and returns to it


class _Plan:
    """Base connector through one node of each loop, ready for loop insertion."""

    def __init__(self, g: ConcatGraph, src: int, dst: int, loops, max_len: float):
        best = None
        for u1 in sorted(set(loops[0].word)):
            try:
                a = connect(g, src, u1, max_len)
            except NotFound:
                continue
            for u2 in sorted(set(loops[1].word)):
                try:
                    b = connect(g, u1, u2, max_len)
                    c = connect(g, u2, dst, max_len)
                except NotFound:
                    continue
                path = a + b[1:] + c[1:]
                ln = float(sum(g.lengths[i] for i in path))
                if best is None or ln < best[0]:
                    best = (ln, a, b, c, u1, u2)
        if best is None:
            raise ConnectorNotFound(f"no connector through the loops within length {max_len}")
        self.length, self.a, self.b, self.c, self.u1, self.u2 = best
        self.loops = loops

    def build(self, k1: int, k2: int):
        l1 = _rotated_loop(self.loops[0], self.u1)
        l2 = _rotated_loop(self.loops[1], self.u2)
        return tuple(self.a + l1 * k1 + self.b[1:] + l2 * k2 + self.c[1:])


def tune_connector(g: ConcatGraph, src: int, dst: int, target_len: float, window: float, loops,
                   max_len: float = 40.0) -> Connector:
    """Admissible path src -> ... -> dst with total length in [target_len, target_len + window].

    `loops` is (longer, shorter) closed geodesics whose period gap is at most
    `window`. Raises Infeasible with the smallest target the construction
    certifies.
    """
    try:
        direct = connect(g, src, dst, max_len)
        dl = float(sum(g.lengths[i] for i in direct))
        if len(direct) >= 2 and target_len - 1e-12 <= dl <= target_len + window + 1e-12:
            return Connector(tuple(direct), dl, 0, 0, dl, dl)
    except NotFound:
        pass
    g1, g2 = loops
    x, y = g1.period, g2.period
    if not (0 < x - y <= window + 1e-12):
        raise ValueError("loop periods must differ by a positive gap of at most window")
    plan = _Plan(g, src, dst, loops, max_len)
    C = math.floor(y / (x - y) + 2) + 1
    T = max(C * y, 1.0)
    threshold = plan.length + T
    if target_len < threshold:
        raise Infeasible(threshold, f"target {target_len:.6g} below {threshold:.6g}")
    # exact arithmetic on the binary values of the lengths
    co = delta_dense_coeffs(Fraction(x), Fraction(y), Fraction(target_len) - Fraction(plan.length), 0)
    path = plan.build(co.m1, co.m2)
    for i, j in zip(path, path[1:]):
        if not g.adj[i, j]:
            raise AssertionError(f"constructed connector has an inadmissible joint {i}->{j}")
    total = float(sum(g.lengths[i] for i in path))
    ident = plan.length + co.m1 * x + co.m2 * y
    if abs(total - ident) > 1e-9:
        raise AssertionError("connector length identity failed")
    return Connector(path, total, co.m1, co.m2, plan.length, threshold)


def connector_threshold(g: ConcatGraph, src: int, dst: int, loops, max_len: float = 40.0) -> float:
    x, y = loops[0].period, loops[1].period
    plan = _Plan(g, src, dst, loops, max_len)
    C = math.floor(y / (x - y) + 2) + 1
    return plan.length + max(C * y, 1.0)


# ---------------------------------------------------------------------------
# gluing


@dataclass
class ShadowingReport:
    targets: list  # segment lengths t_i
    closed: ClosedGeodesic
    path: GeodesicPath  # closed path, time 0 = canonical start
    starts: list  # s_i: time in the closed path shadowing time 0 of segment i
    transitions: list  # s_{i+1} - (s_i + t_i), cyclically
    copied: list  # (a_i, b_i): times in segment i copied verbatim
    sup_distance: list  # sup planar distance on each copied window (0 when exact)
    end_bound: list  # 2 * max uncovered end length: a planar bound outside the copied window
    delta: float
    shadow: float  # achieved exponential-closeness scale at copied-window midpoints
    mode: str
    tau_hat: float | None = None
    connectors: list = field(default_factory=list)

    @property
    def period(self) -> float:
        return self.closed.period


def coincide(p1: GeodesicPath, a1: float, p2: GeodesicPath, a2: float, length: float, tol: float = 1e-8) -> float:
    """Max discrepancy between p1 on [a1, a1+length] and p2 on [a2, a2+length] in polygon coordinates.

    Returns math.inf where the polygons differ.
    """
    cuts = {0.0, length}
    for p, a in ((p1, a1), (p2, a2)):
        for seg in p.segments:
            for base in ([0.0] if p.period is None else
                         [k * p.period for k in range(math.floor((a - p.a) / p.period) - 1,
                                                      math.floor((a + length - p.a) / p.period) + 2)]):
                for tt in (seg.t0 + base, seg.t1 + base):
                    u = tt - a
                    if 0 < u < length:
                        cuts.add(u)
    cuts = sorted(cuts)
    worst = 0.0
    for u0, u1 in zip(cuts, cuts[1:]):
        if u1 - u0 < 1e-9:
            continue
        for u in (u0 + 0.25 * (u1 - u0), 0.5 * (u0 + u1), u1 - 0.25 * (u1 - u0)):
            q1, z1, d1 = p1.position(a1 + u)
            q2, z2, d2 = p2.position(a2 + u)
            if q1 != q2:
                return math.inf
            worst = max(worst, abs(z1 - z2), abs(d1 - d2))
    return worst


def _canonical_shift(g: ConcatGraph, raw: list, canon: tuple) -> float:
    n = len(raw)
    for r in range(n):
        if tuple(raw[r:] + raw[:r]) == canon:
            return float(sum(g.lengths[i] for i in raw[:r]))
    raise AssertionError("canonical word is not a rotation")


def glue_segments(segments, delta: float, cfg: LambdaConfig, g: ConcatGraph, mode: str = "strong",
                  loops=None, loop_qmax: float = 5.0, max_len: float = 40.0) -> ShadowingReport:
    """One closed geodesic shadowing every (path, t) segment in order."""
    if mode not in ("weak", "strong"):
        raise ValueError("mode must be weak or strong")
    if not segments:
        raise ValueError("no segments")
    sps = []
    for i, (p, t) in enumerate(segments):
        if not in_G_eta(p, t, cfg):
            raise NotInG(i)
        sps.append(extend_to_saddle_path(p, t, delta, cfg, g, check_good=False))
    k = len(segments)
    ts = [t for _, t in segments]
    lasts = [sp.word[-1] for sp in sps]
    firsts = [sp.word[0] for sp in sps]
    # interior connector length needed for transition tau: tau + (t_i - s1_i) + s0_{i+1}
    slack = [(ts[i] - sps[i].s1) + sps[(i + 1) % k].s0 for i in range(k)]
    ends = [g.lengths[lasts[i]] + g.lengths[firsts[(i + 1) % k]] for i in range(k)]
    connectors = []
    tau_hat = None
    if mode == "weak":
        for i in range(k):
            try:
                path = connect(g, lasts[i], firsts[(i + 1) % k], max_len)
            except NotFound as exc:
                raise ConnectorNotFound(str(exc)) from None
            if len(path) == 1:
                # a saddle connection cannot follow itself by a zero-length connector; go around once more
                path = _self_connector(g, path[0], max_len)
            connectors.append(Connector(tuple(path), float(sum(g.lengths[j] for j in path))))
    else:
        window = delta / 4
        if loops is None:
            loops = loop_pair(g, window, loop_qmax)
        thr = [connector_threshold(g, lasts[i], firsts[(i + 1) % k], loops, max_len) for i in range(k)]
        tau_hat = max(0.0, max(thr[i] - ends[i] - slack[i] for i in range(k)))
        for i in range(k):
            target = tau_hat + slack[i] + ends[i]
            connectors.append(tune_connector(g, lasts[i], firsts[(i + 1) % k], target, window, loops, max_len))
    raw = []
    offsets = []
    for i in range(k):
        offsets.append(float(sum(g.lengths[j] for j in raw)))
        raw.extend(sps[i].word)
        raw.extend(connectors[i].path[1:-1])
    for a, b in zip(raw, raw[1:] + raw[:1]):
        if not g.adj[a, b]:
            raise AssertionError(f"glued word has an inadmissible joint {a}->{b}")
    cg = make_closed(g, raw)
    shift = _canonical_shift(g, raw, cg.word)
    path = closed_path(g, cg)
    per = cg.period
    sigma = [(o - shift) % per for o in offsets]
    starts = [(sigma[i] - sps[i].s0) % per for i in range(k)]
    transitions = []
    for i in range(k):
        inner = connectors[i].length - ends[i]
        transitions.append(inner - slack[i])
    sup = []
    for i, (p, t) in enumerate(segments):
        sp = sps[i]
        sup.append(coincide(p, sp.s0, path, sigma[i], sp.length))
    end_bound = [2 * max(sps[i].s0, ts[i] - sps[i].s1) for i in range(k)]
    return ShadowingReport(ts, cg, path, starts, transitions, [(sp.s0, sp.s1) for sp in sps], sup, end_bound,
                           delta, max(sp.shadow for sp in sps), mode, tau_hat, connectors)


def _self_connector(g: ConcatGraph, node: int, max_len: float):
    best = None
    for nxt in g.succ[node]:
        try:
            back = connect(g, nxt, node, max_len)
        except NotFound:
            continue
        path = [node] + back
        ln = float(sum(g.lengths[j] for j in path))
        if best is None or ln < best[0]:
            best = (ln, path)
    if best is None:
        raise ConnectorNotFound("no return path")
    return best[1]


@dataclass(frozen=True)
class PeriodicApproximation:
    closed: ClosedGeodesic
    report: ShadowingReport
    T_prime: float
    window: tuple  # [t + T' - delta, t + T']

    @property
    def period(self) -> float:
        return self.closed.period


def periodic_approximation(p: GeodesicPath, t: float, delta: float, cfg: LambdaConfig, g: ConcatGraph,
                           loops=None, loop_qmax: float = 5.0) -> PeriodicApproximation:
    """Regular closed geodesic with period in [t + T' - delta, t + T'] copying the segment's middle."""
    rep = glue_segments([(p, t)], delta, cfg, g, "strong", loops=loops, loop_qmax=loop_qmax)
    T_prime = rep.tau_hat + delta / 4
    lo, hi = t + T_prime - delta, t + T_prime
    per = rep.closed.period
    if not (lo - 1e-9 <= per <= hi + 1e-9):
        raise AssertionError(f"period {per} outside [{lo}, {hi}]")
    if not rep.closed.regular:
        raise AssertionError("periodic approximation is not regular")
    return PeriodicApproximation(rep.closed, rep, float(T_prime), (float(lo), float(hi)))


# ---------------------------------------------------------------------------
# Bowen-type discrepancy


def bowen_constant(phi_norm: float, trim: float, eps: float, holder_c: float = 0.0, holder_alpha: float = 1.0) -> float:
    """K = C/alpha + (4 trim + 4 eps) * ||phi||.

    For potentials constant on polygons, two geodesics that coincide on the
    middle window have identical footpoints there, so the Hoelder term is 0.
    """
    return holder_c / holder_alpha + (4 * trim + 4 * eps) * phi_norm


def bowen_check(phi, surface: Surface, p: GeodesicPath, t: float, rep: ShadowingReport, index: int = 0):
    """(discrepancy, K) for segment `index` of a shadowing report."""
    a, b = rep.copied[index]
    trim = max(a, t - b)
    d = abs(phi.along(p, 0.0, t, surface) - phi.along(rep.path, rep.starts[index], rep.starts[index] + t, surface))
    return d, bowen_constant(phi.norm(surface), trim, rep.delta)


def good_segments(g: ConcatGraph, cfg: LambdaConfig, t: float, count: int, qmax: float = 6.0, step: float = 0.25,
                  closed=None, offset: float = 0.1):
    """Up to `count` G(eta) segments (closed path shifted to start at 0, t) cut from regular closed geodesics."""
    closed = enumerate_closed_geodesics(g, qmax, "regular") if closed is None else closed
    out = []
    for cg in closed:
        path = None
        u = offset
        while u < cg.period:
            if path is None:
                path = closed_path(g, cg)
            seg = flow_shift(path, u)
            if in_G_eta(seg, t, cfg):
                out.append((seg, t, cg, u))
                break
            u += step
        if len(out) >= count:
            break
    return out
