"""The lambda function along geodesics and the (B, G, B) orbit decomposition.

lambda^uu at time t looks forward to the first cone event with an excess turn
(|theta| > pi) at time c and is (|theta| - pi) / max(s, c - t); lambda^ss is
the mirror image in backward time. lambda itself takes the one-sided value
whose event lies within s of t, and the minimum of the two otherwise.

Between two consecutive excess events the profile is built from three kinds
of pieces (constant e/s, e/(u - c) and e/(c - u)), so averages of lambda have
closed forms and the "for all rho" tests of G(eta) can be certified exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import HorizonError
from .saddles import ClosedGeodesic
from .surface import TOL_ANGLE
from .tracer import GeodesicPath

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class LambdaConfig:
    s: float
    eta: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("s must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @classmethod
    def for_constants(cls, ell0: float, eta0: float, theta0: float, s: float | None = None,
                      eta: float | None = None) -> "LambdaConfig":
        s = 0.49 * ell0 if s is None else s
        if 2 * s >= ell0:
            raise ValueError(f"need 2s < ell0 = {ell0}, got s = {s}")
        eta = 0.05 * theta0 / (2 * s) if eta is None else eta
        if eta >= eta0 / (2 * s):
            warnings.warn(f"eta = {eta:.6g} is not below eta0/(2s) = {eta0 / (2 * s):.6g}", stacklevel=2)
        return cls(s, eta)

    @classmethod
    def default(cls, surface, **kw) -> "LambdaConfig":
        from .surface import cone_constants

        return cls.for_constants(*cone_constants(surface), **kw)


@dataclass(frozen=True)
class Timeline:
    """Excess-turn events of a geodesic: times, excesses, and the certified window.

    For closed geodesics `period` is set and events repeat; otherwise data is
    known only on [lo, hi].
    """

    times: tuple
    excess: tuple
    lo: float
    hi: float
    period: float | None = None

    @classmethod
    def of(cls, p) -> "Timeline":
        if isinstance(p, Timeline):
            return p
        if isinstance(p, ClosedGeodesic):
            return cls.from_closed(p)
        if isinstance(p, GeodesicPath):
            evs = [e for e in p.events if abs(e.theta) > math.pi + TOL_ANGLE]
            if p.period is not None:
                return cls(tuple(e.t for e in evs), tuple(abs(e.theta) - math.pi for e in evs), p.a, p.a + p.period,
                           p.period)
            return cls(tuple(e.t for e in evs), tuple(abs(e.theta) - math.pi for e in evs), p.a, p.b)
        raise TypeError(f"cannot read cone events from {type(p).__name__}")

    @classmethod
    def from_closed(cls, cg: ClosedGeodesic) -> "Timeline":
        # joint k (word[k] -> word[k+1]) happens at the end of word[k]; the last joint sits at time 0
        cum = np.concatenate([[0.0], np.cumsum(cg.lengths[:-1])])
        thetas = (cg.thetas[-1],) + tuple(cg.thetas[:-1])
        times, exc = [], []
        for t, th in zip(cum, thetas):
            if abs(th) > math.pi + TOL_ANGLE:
                times.append(float(t))
                exc.append(abs(th) - math.pi)
        return cls(tuple(times), tuple(exc), 0.0, cg.period, cg.period)

    def next_event(self, t: float):
        """(time, excess) of the first excess event at time >= t, or None if certified absent."""
        if self.period is not None:
            if not self.times:
                return None
            k = math.floor((t - self.lo) / self.period)
            for kk in (k, k + 1):
                for c, e in zip(self.times, self.excess):
                    c2 = c + kk * self.period
                    if c2 >= t - FEAS_TOL:
                        return c2, e
            raise AssertionError("unreachable")
        for c, e in zip(self.times, self.excess):
            if c >= t - FEAS_TOL:
                return c, e
        raise HorizonError(f"no excess turn certified after t={t:.6g} within window end {self.hi:.6g}")

    def prev_event(self, t: float):
        if self.period is not None:
            if not self.times:
                return None
            k = math.floor((t - self.lo) / self.period)
            for kk in (k, k - 1):
                for c, e in zip(reversed(self.times), reversed(self.excess)):
                    c2 = c + kk * self.period
                    if c2 <= t + FEAS_TOL:
                        return c2, e
            raise AssertionError("unreachable")
        for c, e in zip(reversed(self.times), reversed(self.excess)):
            if c <= t + FEAS_TOL:
                return c, e
        raise HorizonError(f"no excess turn certified before t={t:.6g} within window start {self.lo:.6g}")

    def events_in(self, lo: float, hi: float):
        """Excess events with lo <= time <= hi (unrolled for closed timelines)."""
        if self.period is None:
            return [(c, e) for c, e in zip(self.times, self.excess) if lo - FEAS_TOL <= c <= hi + FEAS_TOL]
        out = []
        k0 = math.floor((lo - self.lo) / self.period) - 1
        k1 = math.floor((hi - self.lo) / self.period) + 1
        for k in range(k0, k1 + 1):
            for c, e in zip(self.times, self.excess):
                c2 = c + k * self.period
                if lo - FEAS_TOL <= c2 <= hi + FEAS_TOL:
                    out.append((c2, e))
        return out


def lambda_kernel(e_prev, d_prev, e_next, d_next, s):
    """Vectorized lambda from the nearest excess events on each side.

    d_prev = t - c_prev >= 0 and d_next = c_next - t >= 0 (np.inf when there
    is no such event, with excess 0).
    """
    e_prev, d_prev, e_next, d_next = (np.asarray(x, dtype=float) for x in (e_prev, d_prev, e_next, d_next))
    ss = np.where(np.isinf(d_prev), 0.0, e_prev / np.maximum(s, d_prev))
    uu = np.where(np.isinf(d_next), 0.0, e_next / np.maximum(s, d_next))
    return np.where(d_prev < s, ss, np.where(d_next < s, uu, np.minimum(ss, uu)))


def lambda_uu(p, t: float, cfg: LambdaConfig) -> float:
    ev = Timeline.of(p).next_event(t)
    if ev is None:
        return 0.0
    c, e = ev
    return e / max(cfg.s, c - t)


def lambda_ss(p, t: float, cfg: LambdaConfig) -> float:
    ev = Timeline.of(p).prev_event(t)
    if ev is None:
        return 0.0
    c, e = ev
    return e / max(cfg.s, t - c)


def lambda_(p, t: float, cfg: LambdaConfig) -> float:
    tl = Timeline.of(p)
    s = cfg.s
    past = tl.events_in(t - s, t)
    past = [(c, e) for c, e in past if c > t - s]
    future = [(c, e) for c, e in tl.events_in(t, t + s) if c < t + s]
    # with 2s < ell0 both lists are nonempty only at a cone point, where the two sides agree
    # use the window's own events so a turn within rounding of t is not skipped
    if past:
        c, e = max(past)
        return e / max(s, t - c)
    if future:
        c, e = min(future)
        return e / max(s, c - t)
    return min(lambda_ss(tl, t, cfg), lambda_uu(tl, t, cfg))


# the public name follows the mathematical symbol; `lambda` itself is reserved
lambda_value = lambda_


# ---------------------------------------------------------------------------
# exact piecewise profile


@dataclass(frozen=True)
class Piece:
    """lambda on [u0, u1]: 0, e/s, e/(u - c) or e/(c - u)."""

    u0: float
    u1: float
    kind: str  # "zero" | "const" | "dec" | "inc"
    e: float = 0.0
    c: float = 0.0

    def value(self, u):
        if self.kind == "zero":
            return 0.0 * u
        if self.kind == "const":
            return self.e + 0.0 * u
        if self.kind == "dec":
            return self.e / (u - self.c)
        return self.e / (self.c - u)

    def integral(self, a: float, b: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "const":
            return self.e * (b - a)
        if self.kind == "dec":
            return self.e * math.log((b - self.c) / (a - self.c))
        return self.e * math.log((self.c - a) / (self.c - b))

    def reversed(self, pivot: float) -> "Piece":
        """The piece under u -> pivot - u."""
        kind = {"dec": "inc", "inc": "dec"}.get(self.kind, self.kind)
        return Piece(pivot - self.u1, pivot - self.u0, kind, self.e, pivot - self.c)


def profile(p, lo: float, hi: float, cfg: LambdaConfig) -> list:
    """The lambda profile on [lo, hi] as a list of pieces."""
    tl = Timeline.of(p)
    s = cfg.s
    if hi < lo:
        raise ValueError("empty window")
    if hi == lo:
        return []
    prev = tl.prev_event(lo)
    nxt = tl.next_event(hi)
    events = tl.events_in(lo, hi)
    chain = ([prev] if prev is not None else []) + events + ([nxt] if nxt is not None else [])
    # dedupe events shared between the boundary lookups and the interior list
    uniq = []
    for c, e in sorted(chain):
        if uniq and abs(uniq[-1][0] - c) <= FEAS_TOL:
            continue
        uniq.append((c, e))
    pieces = []
    if not uniq:
        return [Piece(lo, hi, "zero")]
    for (ca, ea), (cb, eb) in zip([(-math.inf, 0.0)] + uniq, uniq + [(math.inf, 0.0)]):
        a, b = max(ca, lo), min(cb, hi)
        if b <= a:
            continue
        pieces.extend(_gap_pieces(ca, ea, cb, eb, s, a, b))
    return pieces


def _gap_pieces(ca, ea, cb, eb, s, a, b):
    """Pieces of lambda on [a, b] inside the gap between excess events ca < cb."""
    br = {a, b}
    if math.isfinite(ca):
        br.add(ca + s)
    if math.isfinite(cb):
        br.add(cb - s)
    if math.isfinite(ca) and math.isfinite(cb) and ea > 0 and eb > 0:
        br.add((ea * cb + eb * ca) / (ea + eb))
    pts = sorted(x for x in br if a <= x <= b)
    out = []
    for u0, u1 in zip(pts, pts[1:]):
        if u1 - u0 <= 0:
            continue
        m = 0.5 * (u0 + u1)
        d_prev = m - ca
        d_next = cb - m
        if d_prev < s:
            out.append(Piece(u0, u1, "const", ea / s))
        elif d_next < s:
            out.append(Piece(u0, u1, "const", eb / s))
        else:
            ss = ea / d_prev if math.isfinite(ca) else 0.0
            uu = eb / d_next if math.isfinite(cb) else 0.0
            if not math.isfinite(ca) and not math.isfinite(cb):
                out.append(Piece(u0, u1, "zero"))
            elif ss <= uu:
                out.append(Piece(u0, u1, "dec", ea, ca) if math.isfinite(ca) and ea > 0 else Piece(u0, u1, "zero"))
            else:
                out.append(Piece(u0, u1, "inc", eb, cb) if math.isfinite(cb) and eb > 0 else Piece(u0, u1, "zero"))
    return out


def integral(pieces, a: float, b: float) -> float:
    total = 0.0
    for pc in pieces:
        lo, hi = max(pc.u0, a), min(pc.u1, b)
        if hi > lo:
            total += pc.integral(lo, hi)
    return total


def _min_excess(pieces, origin: float, eta: float):
    """Minimum over rho of F(rho) = int_origin^{origin+rho} lambda - eta*rho, with its argmin."""
    acc = 0.0
    best = (0.0, origin)
    for pc in pieces:
        f0 = acc - eta * (pc.u0 - origin)
        cand = [(f0, pc.u0)]
        if pc.kind == "inc":
            # F' = e/(c-u) - eta increases: interior minimum where lambda = eta
            u_star = pc.c - pc.e / eta
            if pc.u0 < u_star < pc.u1:
                cand.append((acc + pc.integral(pc.u0, u_star) - eta * (u_star - origin), u_star))
        acc += pc.integral(pc.u0, pc.u1)
        cand.append((acc - eta * (pc.u1 - origin), pc.u1))
        for v, u in cand:
            if v < best[0]:
                best = (v, u)
    return best


def in_G_eta(p, t: float, cfg: LambdaConfig, start: float = 0.0) -> bool:
    """Whether the segment [start, start + t] passes both average tests for every rho."""
    if t <= 0:
        return True
    pieces = profile(p, start, start + t, cfg)
    fwd, _ = _min_excess(pieces, start, cfg.eta)
    end = start + t
    rev = [pc.reversed(end) for pc in reversed(pieces)]
    bwd, _ = _min_excess(rev, 0.0, cfg.eta)
    tol = FEAS_TOL * max(1.0, t)
    return fwd >= -tol and bwd >= -tol


def in_B_eta(p, t: float, cfg: LambdaConfig, start: float = 0.0) -> bool:
    if t <= 0:
        return False
    return integral(profile(p, start, start + t, cfg), start, start + t) < cfg.eta * t


@dataclass(frozen=True)
class Decomposition:
    p: float
    q: float
    t: float

    @property
    def prefix(self):
        return (0.0, self.p)

    @property
    def good(self):
        return (self.p, self.q)

    @property
    def suffix(self):
        return (self.q, self.t)


def _last_negative(pieces, origin: float, eta: float, t: float) -> float:
    """sup{rho in (0, t] : F(rho) < 0}, or 0 if F >= 0 throughout."""
    # cumulative F at piece starts
    acc = 0.0
    starts = []
    for pc in pieces:
        starts.append(acc)
        acc += pc.integral(pc.u0, pc.u1)

    def F(u, k):
        pc = pieces[k]
        return starts[k] + pc.integral(pc.u0, u) - eta * (u - origin)

    tol = FEAS_TOL * max(1.0, t)
    for k in range(len(pieces) - 1, -1, -1):
        pc = pieces[k]
        f1 = F(pc.u1, k)
        if f1 < -tol:
            return pc.u1 - origin
        f0 = F(pc.u0, k)
        lo = pc.u0
        if pc.kind == "inc":
            u_star = pc.c - pc.e / eta
            if pc.u0 < u_star < pc.u1 and F(u_star, k) < f0:
                f0, lo = F(u_star, k), u_star
        if f0 < -tol:
            return brentq(lambda u: F(u, k), lo, pc.u1, xtol=1e-14, rtol=1e-15) - origin
    return 0.0


def decompose(p, t: float, cfg: LambdaConfig, start: float = 0.0) -> Decomposition:
    """(B, G, B) split of [start, start + t]; times in the returned record are relative to start."""
    if t <= 0:
        return Decomposition(0.0, 0.0, max(t, 0.0))
    pieces = profile(p, start, start + t, cfg)
    pp = _last_negative(pieces, start, cfg.eta, t)
    rev = [pc.reversed(start + t) for pc in reversed(pieces)]
    qq = t - _last_negative(rev, 0.0, cfg.eta, t)
    if pp >= qq:
        return Decomposition(pp, pp, t) if pp < t else Decomposition(t, t, t)
    return Decomposition(pp, qq, t)


def reg_eta(p, t: float, cfg: LambdaConfig) -> bool:
    return lambda_(p, t, cfg) >= cfg.eta


def lambda_bound(theta0: float, cfg: LambdaConfig) -> float:
    """Upper bound theta0/(2s) for lambda."""
    return theta0 / (2 * cfg.s)
