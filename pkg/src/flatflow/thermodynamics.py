"""Potentials, Birkhoff integrals, partition sums over closed geodesics, pressure and equidistribution.

Partition sums are taken over classes of closed saddle paths with period in
[Q - delta, Q]. Two evaluation methods exist:

* ``enumerate``: every class is listed, sums are exact (log-sum-exp).
* ``transfer``: sums over all classes come from the binned transfer-operator
  counter; singular classes are always listed exactly (their number grows
  polynomially) and subtracted. Periods are rounded to a grid of width h.

``auto`` enumerates when the class count fits the step budget and falls
back to the transfer counter otherwise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import EmptyWindow, InsufficientData, NotComparable, WorkLimitExceeded
from .saddles import ClosedGeodesic, ConcatGraph, SaddleConnection, build_concat_graph, enumerate_closed_geodesics
from .surface import Surface
from .transfer import DEFAULT_H, NecklaceSums
from .tracer import GeodesicPath

DATA = Path(__file__).parent / "data"
ENUM_BUDGET = 1_000_000


@dataclass(frozen=True)
class Potential:
    """Constant on each polygon (keyed by polygon id) plus a global offset; unlisted polygons get 0."""

    values: tuple = ()  # ((poly id, value), ...)
    offset: float = 0.0

    @classmethod
    def from_mapping(cls, values: dict, offset: float = 0.0) -> "Potential":
        return cls(tuple(sorted((_poly_key(k), float(v)) for k, v in values.items())), float(offset))

    @classmethod
    def constant(cls, c: float) -> "Potential":
        return cls((), float(c))

    @classmethod
    def from_dict(cls, data: dict) -> "Potential":
        data = dict(data)
        offset = float(data.pop("offset", 0.0))
        return cls.from_mapping(data, offset)

    @classmethod
    def load(cls, path) -> "Potential":
        p = Path(path)
        if not p.exists() and not p.is_absolute() and (DATA / p.name).exists():
            p = DATA / p.name
        return cls.from_dict(json.loads(p.read_text()))

    def to_dict(self) -> dict:
        out = {str(k): v for k, v in self.values}
        out["offset"] = self.offset
        return out

    def value(self, poly_id) -> float:
        return dict(self.values).get(poly_id, 0.0) + self.offset

    def shifted(self, c: float) -> "Potential":
        return Potential(self.values, self.offset + c)

    def scaled(self, c: float) -> "Potential":
        return Potential(tuple((k, c * v) for k, v in self.values), c * self.offset)

    def per_index(self, surface: Surface | None, n: int | None = None) -> np.ndarray:
        """Values (offset included) indexed by internal polygon index."""
        table = dict(self.values)
        if surface is not None:
            return np.array([table.get(pid, 0.0) + self.offset for pid in surface.poly_ids])
        n = (max(table) + 1 if table else 0) if n is None else n
        return np.array([table.get(i, 0.0) + self.offset for i in range(n)])

    def norm(self, surface: Surface | None = None) -> float:
        """Sup norm of the function on the surface."""
        if surface is not None:
            return float(np.max(np.abs(self.per_index(surface))))
        vals = [abs(v + self.offset) for _, v in self.values]
        return max(vals + [abs(self.offset)])

    def oscillation_norm(self, surface: Surface | None = None) -> float:
        """max |value - offset|, the size of the non-constant part."""
        if surface is not None:
            return float(np.max(np.abs(self.per_index(surface) - self.offset)))
        return max([abs(v) for _, v in self.values] + [0.0])

    def constant_value(self, surface: Surface | None = None):
        """The value if the potential is constant on the surface, else None."""
        if surface is not None:
            vals = self.per_index(surface)
            return float(vals[0]) if np.all(vals == vals[0]) else None
        return self.offset if all(v == 0.0 for _, v in self.values) else None

    def is_zero(self) -> bool:
        return self.offset == 0.0 and all(v == 0.0 for _, v in self.values)

    def integral(self, poly_lengths, surface: Surface | None = None) -> float:
        """Exact integral over a path given as {polygon index: length} (or pairs)."""
        items = poly_lengths.items() if isinstance(poly_lengths, dict) else poly_lengths
        table = dict(self.values)
        total = 0.0
        for idx, ln in items:
            pid = surface.poly_ids[idx] if surface is not None else idx
            total += (table.get(pid, 0.0) + self.offset) * ln
        return total

    def along(self, p: GeodesicPath, lo: float, hi: float, surface: Surface | None = None) -> float:
        return self.integral(p.polygon_lengths(lo, hi), surface)


def _poly_key(k):
    if isinstance(k, str):
        try:
            return int(k)
        except ValueError:
            return k
    return k


def birkhoff_integral(phi: Potential, gamma, surface: Surface | None = None) -> float:
    """Integral of phi over one period of a closed geodesic (or along a path or saddle connection)."""
    if isinstance(gamma, (ClosedGeodesic, SaddleConnection)):
        return phi.integral(gamma.poly_lengths, surface)
    if isinstance(gamma, GeodesicPath):
        hi = gamma.a + gamma.period if gamma.period is not None else gamma.b
        return phi.along(gamma, gamma.a, hi, surface)
    raise TypeError(f"cannot integrate along {type(gamma).__name__}")


# ---------------------------------------------------------------------------
# window sums


@dataclass(frozen=True)
class PartitionSum:
    value: float
    log_value: float
    count: int
    method: str  # "enumerate" (exact) or "transfer" (binned estimate)
    klass: str = "regular"

    def __iter__(self):
        return iter((self.value, self.count))

    @property
    def exact(self) -> bool:
        return self.method == "enumerate"


class OrbitSums:
    """Class sums for one surface graph, potential and (optional) observable up to period qmax."""

    def __init__(self, g: ConcatGraph, phi: Potential, qmax: float, f: Potential | None = None,
                 method: str = "auto", h: float = DEFAULT_H, budget: int = ENUM_BUDGET):
        if method not in ("auto", "enumerate", "transfer"):
            raise ValueError(method)
        self.g = g
        self.s = g.surface
        self.phi = phi
        self.f = f
        self.qmax = qmax
        self.h = h
        s = self.s
        nodes = g.nodes
        self.sc_phi = np.array([phi.integral(sc.poly_lengths, s) for sc in nodes])
        self.f_const = None
        self.sc_f = None
        if f is not None:
            self.f_const = f.constant_value(s)
            if self.f_const is None:
                # the offset is exact; only the per-polygon part is integrated
                var = Potential(f.values, 0.0)
                self.sc_f = np.array([var.integral(sc.poly_lengths, s) for sc in nodes])
        self.singular = [self._row(c) for c in enumerate_closed_geodesics(g, qmax, "singular")]
        self.classes = None
        self.method = method
        if method in ("auto", "enumerate"):
            try:
                self.classes = [self._row(c) for c in enumerate_closed_geodesics(g, qmax, "all", max_steps=budget)]
                self.method = "enumerate"
            except WorkLimitExceeded:
                if method == "enumerate":
                    raise
                self.method = "transfer"
        if self.method == "transfer":
            self._build_transfer()

    def _row(self, c: ClosedGeodesic):
        phi = float(sum(self.sc_phi[i] for i in c.word))
        fv = float(sum(self.sc_f[i] for i in c.word)) if self.sc_f is not None else 0.0
        return (c.period, phi, fv, c.regular, c.word)

    def _build_transfer(self):
        g = self.g
        h = self.h
        tangent = self.sc_f
        self.ns = NecklaceSums(g, self.sc_phi, self.qmax, h, tangent)
        if self.phi.is_zero() and tangent is None:
            self.ns_count = self.ns
        else:
            self.ns_count = NecklaceSums(g, np.zeros(len(g.nodes)), self.qmax, h)
        nb = self.ns.nbins + 1
        sw, st, sc = np.zeros(nb), np.zeros(nb), np.zeros(nb)
        for period, phi, fv, _, word in self.singular:
            b = self.ns.binned_length(word)
            if b < nb:
                sw[b] += math.exp(phi)
                st[b] += math.exp(phi) * fv
                sc[b] += 1
        self.reg_w = self.ns.weights - sw
        self.reg_c = self.ns_count.weights - sc
        self.reg_t = (self.ns.tangents - st) if self.ns.tangents is not None else None
        self.all_w, self.all_c = self.ns.weights, self.ns_count.weights

    def _rows(self, lo: float, hi: float, klass: str):
        src = self.singular if klass == "singular" else self.classes
        out = []
        for row in src:
            if lo - 1e-9 <= row[0] <= hi + 1e-9:
                if klass == "regular" and not row[3]:
                    continue
                out.append(row)
        return out

    def window(self, lo: float, hi: float, klass: str = "regular"):
        """(log sum e^Phi, count, sum e^Phi F / len or None, method)."""
        if hi > self.qmax + 1e-9:
            raise ValueError(f"window end {hi} beyond qmax {self.qmax}")
        if klass == "singular" or self.method == "enumerate":
            rows = self._rows(lo, hi, klass)
            if not rows:
                return -math.inf, 0, (0.0 if self.f is not None else None), "enumerate"
            phis = np.array([r[1] for r in rows])
            logv = float(logsumexp(phis))
            tan = None
            if self.f is not None:
                if self.f_const is not None:
                    tan = self.f_const * math.exp(logv)
                else:
                    per = np.array([r[0] for r in rows])
                    fv = np.array([r[2] for r in rows])
                    tan = float(np.sum(np.exp(phis - logv) * fv / per)) * math.exp(logv)
                    tan += self.f.offset * math.exp(logv)
            return logv, len(rows), tan, "enumerate"
        b0, b1 = self.ns.bin_range(lo, hi)
        if klass == "regular":
            w, c, t = self.reg_w, self.reg_c, self.reg_t
        else:
            w, c, t = self.all_w, self.all_c, (self.ns.tangents if self.ns.tangents is not None else None)
        total = float(w[b0:b1 + 1].sum()) if b1 >= b0 else 0.0
        count = int(round(float(c[b0:b1 + 1].sum()))) if b1 >= b0 else 0
        logv = math.log(total) if total > 0 else -math.inf
        tan = None
        if self.f is not None:
            if self.f_const is not None:
                tan = self.f_const * total
            else:
                lengths = np.arange(b0, b1 + 1) * self.h
                tan = float(np.sum(t[b0:b1 + 1] / np.where(lengths > 0, lengths, 1.0))) + self.f.offset * total
        return logv, count, tan, "transfer"


def _graph(surface: Surface, g: ConcatGraph | None, qmax: float) -> ConcatGraph:
    if g is None or g.lmax < qmax - 1e-12:
        return build_concat_graph(surface, qmax)
    return g


def lambda_R(surface: Surface, phi: Potential, Q: float, delta: float, g: ConcatGraph | None = None,
             method: str = "auto", sums: OrbitSums | None = None) -> PartitionSum:
    """Sum of e^Phi over regular classes with period in [Q - delta, Q]."""
    return _lambda(surface, phi, Q, delta, g, method, sums, "regular")


def lambda_Sing(surface: Surface, phi: Potential, Q: float, delta: float, g: ConcatGraph | None = None,
                method: str = "auto", sums: OrbitSums | None = None) -> PartitionSum:
    """Sum of e^Phi over singular classes with period in [Q - delta, Q] (always exact)."""
    return _lambda(surface, phi, Q, delta, g, method, sums, "singular")


def _lambda(surface, phi, Q, delta, g, method, sums, klass):
    if not (Q > delta > 0):
        raise ValueError("need Q > delta > 0")
    if sums is None:
        g = _graph(surface, g, Q)
        if klass == "singular":
            method = "enumerate"
            sums = OrbitSums.__new__(OrbitSums)
            sums.g, sums.s, sums.phi, sums.f, sums.qmax, sums.method = g, surface, phi, None, Q, "enumerate"
            sums.sc_phi = np.array([phi.integral(sc.poly_lengths, surface) for sc in g.nodes])
            sums.sc_f, sums.f_const = None, None
            sums.singular = [sums._row(c) for c in enumerate_closed_geodesics(g, Q, "singular")]
            sums.classes = []
        else:
            sums = OrbitSums(g, phi, Q, method=method)
    logv, count, _, used = sums.window(Q - delta, Q, klass)
    return PartitionSum(math.exp(logv) if logv > -math.inf else 0.0, logv, count, used, klass)


# ---------------------------------------------------------------------------
# pressure


@dataclass
class PressureReport:
    Q: list
    delta: float
    klass: str
    counts: list
    log_values: list
    slope: float
    intercept: float
    residual: float
    successive: list  # slopes between consecutive grid points
    diagnostics: list  # |successive[i] - successive[i-1]|
    method: str
    truncated: bool = False
    estimate: bool = True

    def to_dict(self) -> dict:
        return {
            "Q": self.Q, "delta": self.delta, "class": self.klass, "counts": self.counts,
            "logLambda": self.log_values, "slope": self.slope, "intercept": self.intercept,
            "residual": self.residual, "successiveSlopes": self.successive, "diagnostics": self.diagnostics,
            "method": self.method, "truncated": self.truncated,
            "semantics": "estimate: least-squares growth rate of log partition sums",
        }


def fit_report(Q, logs, counts, delta, klass, method) -> PressureReport:
    Q = [float(q) for q in Q]
    if len(Q) < 3:
        raise InsufficientData("need at least three grid points")
    for q, c in zip(Q, counts):
        if c == 0:
            raise InsufficientData(f"no {klass} classes with period in [{q - delta}, {q}]")
    x, y = np.array(Q), np.array(logs)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, intercept]) - y) ** 2)))
    succ = [float((y[i + 1] - y[i]) / (x[i + 1] - x[i])) for i in range(len(x) - 1)]
    diag = [abs(succ[i] - succ[i - 1]) for i in range(1, len(succ))]
    return PressureReport(Q, delta, klass, list(counts), [float(v) for v in y], float(slope), float(intercept),
                          resid, succ, diag, method)


def pressure_estimate(surface: Surface, phi: Potential, Qgrid, delta: float, klass: str = "regular",
                      g: ConcatGraph | None = None, method: str = "auto", sums: OrbitSums | None = None) -> PressureReport:
    Qgrid = list(Qgrid)
    if any(b <= a for a, b in zip(Qgrid, Qgrid[1:])):
        raise ValueError("Qgrid must be increasing")
    if len(Qgrid) < 3:
        raise InsufficientData("need at least three grid points")
    if sums is None:
        g = _graph(surface, g, max(Qgrid))
        sums = OrbitSums(g, phi, max(Qgrid), method=method)
    logs, counts, used = [], [], set()
    for q in Qgrid:
        logv, count, _, m = sums.window(q - delta, q, klass)
        logs.append(logv)
        counts.append(count)
        used.add(m)
    return fit_report(Qgrid, logs, counts, delta, klass, "+".join(sorted(used)))


@dataclass
class GapReport:
    pressure: float
    pressure_sing: float
    gap: float
    nearly_constant_bound: float
    phi_oscillation: float
    satisfied: bool
    regular: PressureReport
    singular: PressureReport
    sing_spread: float = 0.0  # spread of phi over polygons met by singular classes

    @property
    def locally_constant_warning(self) -> bool:
        """Best-effort flag: phi takes different values on polygons crossed by singular classes."""
        return self.sing_spread > 0.0

    def to_dict(self) -> dict:
        return {
            "singularSpread": self.sing_spread, "locallyConstantWarning": self.locally_constant_warning,
            "P": self.pressure, "P_Sing": self.pressure_sing, "gap": self.gap,
            "nearlyConstantBound": self.nearly_constant_bound, "phiOscillation": self.phi_oscillation,
            "satisfied": self.satisfied, "regular": self.regular.to_dict(), "singular": self.singular.to_dict(),
            "semantics": "estimates from closed-geodesic growth; P_Sing over singular closed classes only",
        }


def pressure_gap_report(surface: Surface, phi: Potential, Qgrid, delta: float, g: ConcatGraph | None = None,
                        method: str = "auto", sums: OrbitSums | None = None) -> GapReport:
    Qgrid = list(Qgrid)
    g = _graph(surface, g, max(Qgrid)) if sums is None else sums.g
    if sums is None:
        sums = OrbitSums(g, phi, max(Qgrid), method=method)
    method = sums.method
    reg = pressure_estimate(surface, phi, Qgrid, delta, "regular", sums=sums)
    sing = pressure_estimate(surface, phi, Qgrid, delta, "singular", sums=sums)
    if phi.is_zero():
        reg0, sing0 = reg, sing
    else:
        zero = OrbitSums(g, Potential(), max(Qgrid), method=method)
        reg0 = pressure_estimate(surface, Potential(), Qgrid, delta, "regular", sums=zero)
        sing0 = pressure_estimate(surface, Potential(), Qgrid, delta, "singular", sums=zero)
    bound = 0.5 * (reg0.slope - sing0.slope)
    osc = phi.oscillation_norm(surface)
    return GapReport(reg.slope, sing.slope, reg.slope - sing.slope, bound, osc, osc < bound, reg, sing,
                     singular_spread(phi, sums))


def singular_spread(phi: Potential, sums: OrbitSums) -> float:
    vals = phi.per_index(sums.s)
    polys = {poly for row in sums.singular for i in row[4] for poly, _ in sums.g.nodes[i].poly_lengths}
    if not polys:
        return 0.0
    sub = [vals[q] for q in sorted(polys)]
    return float(max(sub) - min(sub))


# ---------------------------------------------------------------------------
# equidistribution


def weighted_orbit_average(surface: Surface, phi: Potential, Q: float, delta: float, f: Potential,
                           g: ConcatGraph | None = None, method: str = "auto", sums: OrbitSums | None = None) -> float:
    """mu_{Q,delta}(f): e^Phi-weighted average over regular classes of the orbit average F/len."""
    if sums is None:
        g = _graph(surface, g, Q)
        sums = OrbitSums(g, phi, Q, f=f, method=method)
    logv, count, tan, _ = sums.window(Q - delta, Q, "regular")
    if count == 0 or logv == -math.inf:
        raise EmptyWindow(f"no regular classes with period in [{Q - delta}, {Q}]")
    const = f.constant_value(surface)
    if const is not None:
        return const
    return tan / math.exp(logv)


@dataclass
class EquidistributionSeries:
    Q: list
    values: list
    differences: list  # |mu_{Q_{i+1}}(f) - mu_{Q_i}(f)|
    method: str

    def to_rows(self):
        return [(q, v) for q, v in zip(self.Q, self.values)]


def equidistribution_series(surface: Surface, phi: Potential, Qgrid, delta: float, f: Potential,
                            g: ConcatGraph | None = None, method: str = "auto") -> EquidistributionSeries:
    Qgrid = list(Qgrid)
    g = _graph(surface, g, max(Qgrid))
    sums = OrbitSums(g, phi, max(Qgrid), f=f, method=method)
    vals = [weighted_orbit_average(surface, phi, q, delta, f, sums=sums) for q in Qgrid]
    diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    return EquidistributionSeries([float(q) for q in Qgrid], vals, diffs, sums.method)


# ---------------------------------------------------------------------------
# separated sets


def _close_along(s: Surface, p1: GeodesicPath, p2: GeodesicPath, t: float, eps: float) -> bool:
    """Whether d(p1(u), p2(u)) <= eps at every sample u in [0, t] (sample step eps/4)."""
    from .distance import surface_distance
    from .errors import CutoffTooLarge

    n = max(2, int(math.ceil(t / (eps / 4))) + 1)
    for u in np.linspace(0.0, t, n):
        q1, z1, _ = p1.position(u)
        q2, z2, _ = p2.position(u)
        if q1 == q2 and abs(z1 - z2) <= eps:
            continue
        try:
            d = surface_distance(s, (s.poly_ids[q1], z1), (s.poly_ids[q2], z2), eps)
        except CutoffTooLarge:  # cannot certify closeness within budget: count the pair as separated
            return False
        if d is None:
            return False
    return True


def separated_set_pressure_lower(surface: Surface, phi: Potential, t: float, epsilon: float, seeds) -> float:
    """(1/t) log of the e^{int phi} sum over a greedy (t, epsilon)-separated subset of the seeds."""
    if t <= 0 or epsilon <= 0:
        raise ValueError("t and epsilon must be positive")
    kept = []
    for p in seeds:
        if p.period is None and p.b < t - 1e-9:
            raise ValueError("seed shorter than t")
        if all(not _close_along(surface, p, q, t, epsilon) for q in kept):
            kept.append(p)
    logs = [phi.along(p, 0.0, t, surface) for p in kept]
    return float(logsumexp(logs)) / t
