"""Command-line entry point.

Exit codes: 0 success, 1 other domain error, 2 invalid input (surface,
potential or segment files), 3 budget exhausted, 64 usage error.
JSON outputs carry ``schema`` and the run configuration; CSV outputs carry
both in leading ``#`` comment lines, followed by a column-semantics line.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import BudgetExceeded, ConeHit, FlatflowError, ValidationError, WorkLimitExceeded
from .surface import TOL_ANGLE, TOL_GEOM, Surface, cone_constants, gauss_bonnet_residual, load_surface

SCHEMA = 1
EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_BUDGET, EXIT_USAGE = 0, 1, 2, 3, 64
DATA = Path(__file__).parent / "data"


class UsageError(Exception):
    pass


class InputError(Exception):
    """Unreadable or malformed input file (exit 2)."""


@dataclass
class RunConfig:
    surface: str
    tol_geom: float = TOL_GEOM
    tol_angle: float = TOL_ANGLE
    max_charts: int = 2_000_000
    max_graph_nodes: int = 100_000
    max_cycles: int = 50_000_000
    wall_clock: float = 3600.0  # soft limit in seconds, checked between stages
    s: float | None = None
    eta: float | None = None
    seed: int = 0
    output: str = "-"
    _t0: float = field(default_factory=time.monotonic, repr=False, compare=False)

    def __post_init__(self):
        for name in ("max_charts", "max_graph_nodes", "max_cycles", "wall_clock"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        for name in ("tol_geom", "tol_angle"):
            if not 1e-15 <= getattr(self, name) <= 1e-3:
                raise UsageError(f"{name} must lie in [1e-15, 1e-3]")

    def echo(self) -> dict:
        # thread count is deliberately absent: outputs must not depend on it
        d = asdict(self)
        d.pop("_t0")
        d["surface"] = Path(self.surface).name
        return d

    def check_clock(self, stage: str):
        if time.monotonic() - self._t0 > self.wall_clock:
            raise WorkLimitExceeded(f"wall clock before {stage}", self.wall_clock)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# helpers


def _surface(path: str) -> Surface:
    p = Path(path)
    if not p.exists() and (DATA / p.name).exists() and not p.is_absolute() and p.parent == Path("."):
        p = DATA / p.name
    if not p.exists():
        raise InputError(f"no such surface file: {path}")
    try:
        return load_surface(p)
    except ValidationError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"malformed surface file {path}: {exc}") from exc


def _json_file(path: str):
    p = Path(path)
    if not p.exists() and (DATA / p.name).exists():
        p = DATA / p.name
    if not p.exists():
        raise InputError(f"no such file: {path}")
    try:
        return json.loads(p.read_text())
    except ValueError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def _potential(path: str):
    from .thermodynamics import Potential

    try:
        return Potential.from_dict(_json_file(path))
    except (TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"bad potential file {path}: {exc}") from exc


def _qgrid(text: str):
    try:
        parts = [float(x) for x in text.split(":")]
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected a:b:step") from None
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0:
        raise UsageError(f"bad grid {text!r}; expected a:b:step")
    a, b, st = parts
    n = int(math.floor((b - a) / st + 1e-9))
    return [a + k * st for k in range(n + 1)]


def _span(text: str):
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"bad window {text!r}; expected a:b") from None
    return a, b


def _start(text: str):
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"bad start {text!r}; expected poly:x:y")
    poly = int(parts[0]) if parts[0].lstrip("-").isdigit() else parts[0]
    vals = [float(x) for x in parts[1:]]
    return poly, (vals[0], vals[1]), (vals[2] if len(vals) == 3 else None)


def _num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    return _num(obj)


def _json_text(cfg: RunConfig, command: str, payload: dict) -> str:
    doc = {"schema": SCHEMA, "command": command, "config": cfg.echo()}
    doc.update(payload)
    return json.dumps(_clean(doc), indent=1, sort_keys=True) + "\n"


def _csv_text(cfg: RunConfig, command: str, header, rows, semantics: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA}\n")
    buf.write(f"# command: {command}\n")
    buf.write("# config: " + json.dumps(_clean(cfg.echo()), sort_keys=True) + "\n")
    buf.write("# semantics: " + ",".join(f"{h}={semantics.get(h, 'exact')}" for h in header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("-inf" if v < 0 else "inf")
    return v


def _emit(cfg: RunConfig, text: str):
    if cfg.output in ("-", ""):
        sys.stdout.write(text)
    else:
        Path(cfg.output).write_text(text)


def _lambda_cfg(s: Surface, cfg: RunConfig):
    from .lambdas import LambdaConfig

    return LambdaConfig.default(s, s=cfg.s, eta=cfg.eta)


def _graph(s: Surface, lmax: float, cfg: RunConfig):
    from .saddles import build_concat_graph

    cfg.check_clock("saddle connection enumeration")
    g = build_concat_graph(s, lmax, max_pieces=cfg.max_charts)
    if len(g.nodes) > cfg.max_graph_nodes:
        raise WorkLimitExceeded("graph nodes", cfg.max_graph_nodes)
    return g


def _closed_by_key(g, key: str):
    from .saddles import make_closed

    try:
        word = [int(x) for x in key.split("-")]
    except ValueError:
        raise UsageError(f"bad canonical key {key!r}") from None
    if not word or max(word) >= len(g.nodes) or min(word) < 0:
        raise UsageError(f"key {key!r} refers to connections beyond the graph (raise --max-len)")
    try:
        return make_closed(g, word)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands


def _cone_table(s: Surface):
    return [{"id": c.id, "angle": c.total_angle, "angleOverPi": c.total_angle / math.pi,
             "excess": c.excess, "corners": len(c.corners)} for c in s.cone_classes]


def cmd_validate(a, cfg):
    s = _surface(a.surface)
    return _json_text(cfg, "validate", {
        "valid": True, "name": s.name, "genus": s.genus, "coneClasses": _cone_table(s),
        "gaussBonnetResidual": gauss_bonnet_residual(s)})


def cmd_invariants(a, cfg):
    s = _surface(a.surface)
    ell0, eta0, theta0 = cone_constants(s)
    return _json_text(cfg, "invariants", {
        "name": s.name, "genus": s.genus, "coneClasses": _cone_table(s), "gaussBonnetResidual": gauss_bonnet_residual(s),
        "eta0": eta0, "theta0": theta0, "ell0": ell0, "area": s.area()})


def _path_record(p):
    from .tracer import classify_window, turning_signature

    kind, t = classify_window(p)
    return {
        "a": p.a, "b": p.b, "period": p.period,
        "segments": [{"t0": x.t0, "t1": x.t1, "poly": x.poly, "x0": x.z0.real, "y0": x.z0.imag,
                      "ux": x.u.real, "uy": x.u.imag} for x in p.segments],
        "events": [{"t": e.t, "cone": e.cone, "left": e.left, "right": e.right, "theta": e.theta} for e in p.events],
        "signature": [list(x) for x in turning_signature(p)],
        "classification": {"kind": kind, "time": t},
    }


def _trace_spec(s, text: str, direction, length: float, policy, backward: float = 0.0):
    from .tracer import trace

    poly, pt, d = _start(text)
    d = direction if d is None else d
    if d is None:
        raise UsageError("missing direction")
    return trace(s, (poly, pt, d), length, policy, backward=backward)


def cmd_trace(a, cfg):
    from .tracer import ConePolicy

    s = _surface(a.surface)
    policy = ConePolicy.parse(a.at_cone)
    stopped = None
    try:
        p = _trace_spec(s, a.start, a.dir, a.len, policy, a.backward)
    except ConeHit as hit:
        p = hit.path
        stopped = {"time": hit.time, "coneClass": hit.cone_class}
    rec = _path_record(p) if p is not None else None
    return _json_text(cfg, "trace", {"path": rec, "stoppedAtCone": stopped, "policy": a.at_cone})


def cmd_gsdist(a, cfg):
    from .distance import gs_distance_upper
    from .tracer import ConePolicy

    s = _surface(a.surface)
    policy = ConePolicy.parse(a.at_cone)
    try:
        p1 = _trace_spec(s, a.trace_a, None, a.T, policy, a.T)
        p2 = _trace_spec(s, a.trace_b, None, a.T, policy, a.T)
    except ConeHit as hit:
        raise FlatflowError(f"trace hit a cone point at t={hit.time}; choose another policy") from None
    bound, tail = gs_distance_upper(p1, p2, a.T, s)
    return _json_text(cfg, "gsdist", {"bound": bound, "tail": tail, "T": a.T,
                                      "semantics": "upper bound for one pair of lifts"})


def cmd_saddles(a, cfg):
    from .saddles import enumerate_saddle_connections

    s = _surface(a.surface)
    scs = enumerate_saddle_connections(s, a.max_len, max_pieces=cfg.max_charts)
    header = ["id", "startClass", "endClass", "holonomy_x", "holonomy_y", "length"]
    rows = [[sc.id, sc.start, sc.end, sc.holonomy.real, sc.holonomy.imag, sc.length] for sc in scs]
    if a.out == "json":
        return _json_text(cfg, "saddles", {"count": len(rows), "columns": header, "rows": rows})
    return _csv_text(cfg, "saddles", header, rows, {})


def cmd_closed(a, cfg):
    from .saddles import enumerate_closed_geodesics

    s = _surface(a.surface)
    g = _graph(s, a.max_len, cfg)
    cls = enumerate_closed_geodesics(g, a.max_len, a.klass, max_steps=cfg.max_cycles)
    header = ["canonicalKey", "period", "class", "word"]
    rows = [[c.key, c.period, c.klass, " ".join(str(i) for i in c.word)] for c in cls]
    if a.out == "json":
        return _json_text(cfg, "closed", {"count": len(rows), "columns": header, "rows": rows})
    return _csv_text(cfg, "closed", header, rows, {})


def cmd_lambda(a, cfg):
    from .lambdas import integral, lambda_, lambda_ss, lambda_uu, profile
    from .saddles import closed_path

    s = _surface(a.surface)
    if a.s is not None:
        cfg.s = a.s
    if a.eta is not None:
        cfg.eta = a.eta
    lcfg = _lambda_cfg(s, cfg)
    g = _graph(s, a.max_len, cfg)
    cg = _closed_by_key(g, a.closed)
    p = closed_path(g, cg)
    per = cg.period
    mean = integral(profile(p, 0.0, per, lcfg), 0.0, per) / per
    if a.profile_out:
        ts = [per * k / a.samples for k in range(a.samples)]
        rows = [[t, lambda_(p, t, lcfg), lambda_uu(p, t, lcfg), lambda_ss(p, t, lcfg)] for t in ts]
        Path(a.profile_out).write_text(_csv_text(cfg, "lambda", ["t", "lambda", "lambda_uu", "lambda_ss"], rows, {}))
    return _json_text(cfg, "lambda", {"closed": cg.key, "period": per, "class": cg.klass, "s": lcfg.s,
                                      "eta": lcfg.eta, "meanLambda": mean})


def cmd_decompose(a, cfg):
    from .lambdas import decompose
    from .saddles import closed_path

    s = _surface(a.surface)
    if a.eta is not None:
        cfg.eta = a.eta
    if a.s is not None:
        cfg.s = a.s
    lcfg = _lambda_cfg(s, cfg)
    g = _graph(s, a.max_len, cfg)
    cg = _closed_by_key(g, a.closed)
    lo, hi = _span(a.window)
    if hi < lo:
        raise UsageError("window end before start")
    d = decompose(closed_path(g, cg), hi - lo, lcfg, start=lo)
    return _json_text(cfg, "decompose", {"closed": cg.key, "window": [lo, hi], "eta": lcfg.eta, "s": lcfg.s,
                                         "p": d.p, "q": d.q, "t": d.t, "prefixBad": list(d.prefix),
                                         "good": list(d.good), "suffixBad": list(d.suffix)})


def _load_segments(s, g, data):
    """Segments from JSON: {"closed": key, "shift": u, "t": t} or {"start": "poly:x:y", "dir": d, "t": t, "atCone": ...}."""
    from .saddles import closed_path
    from .tracer import ConePolicy, flow_shift, trace

    items = data if isinstance(data, list) else [data]
    out = []
    for it in items:
        if not isinstance(it, dict) or "t" not in it:
            raise InputError("each segment needs a length 't'")
        t = float(it["t"])
        if "closed" in it:
            p = flow_shift(closed_path(g, _closed_by_key(g, str(it["closed"]))), float(it.get("shift", 0.0)))
        elif "start" in it:
            poly, pt, d = _start(str(it["start"]))
            d = float(it.get("dir", d if d is not None else 0.0))
            margin = float(it.get("margin", 1.0))
            policy = ConePolicy.parse(str(it.get("atCone", "stop")))
            p = trace(s, (poly, pt, d), t + margin, policy)
        else:
            raise InputError("segment needs 'closed' or 'start'")
        out.append((p, t))
    return out


def _report_record(rep):
    return {
        "period": rep.period, "closed": rep.closed.key, "regular": rep.closed.regular, "mode": rep.mode,
        "targets": rep.targets, "starts": rep.starts, "transitions": rep.transitions, "copied": rep.copied,
        "supDistance": rep.sup_distance, "endBound": rep.end_bound, "delta": rep.delta, "shadow": rep.shadow,
        "tauHat": rep.tau_hat, "connectors": [{"path": list(c.path), "length": c.length, "m1": c.k1, "m2": c.k2}
                                               for c in rep.connectors],
    }


def cmd_spec(a, cfg):
    from .specification import glue_segments, periodic_approximation

    s = _surface(a.surface)
    lcfg = _lambda_cfg(s, cfg)
    g = _graph(s, a.max_len, cfg)
    if a.spec_cmd == "glue":
        segs = _load_segments(s, g, _json_file(a.segments))
        rep = glue_segments(segs, a.delta, lcfg, g, a.mode, loop_qmax=a.loop_qmax)
        return _json_text(cfg, "spec glue", {"report": _report_record(rep)})
    segs = _load_segments(s, g, _json_file(a.segment))
    if len(segs) != 1:
        raise InputError("periodic approximation takes exactly one segment")
    p, t = segs[0]
    pa = periodic_approximation(p, t, a.delta, lcfg, g, loop_qmax=a.loop_qmax)
    return _json_text(cfg, "spec periodic", {"period": pa.period, "Tprime": pa.T_prime, "window": list(pa.window),
                                             "report": _report_record(pa.report)})


def _sums(s, phi, Q, cfg, f=None, method="auto"):
    from .thermodynamics import OrbitSums

    g = _graph(s, max(Q), cfg)
    cfg.check_clock("partition sums")
    return OrbitSums(g, phi, max(Q), f=f, method=method, budget=min(cfg.max_cycles, 1_000_000))


def cmd_pressure(a, cfg):
    from .thermodynamics import pressure_estimate

    s = _surface(a.surface)
    phi = _potential(a.phi)
    Q = _qgrid(a.Q)
    sums = _sums(s, phi, Q, cfg, method=a.method)
    rep = pressure_estimate(s, phi, Q, a.delta, a.klass, sums=sums)
    return _json_text(cfg, "pressure", {"report": rep.to_dict()})


def cmd_gap(a, cfg):
    from .thermodynamics import pressure_gap_report

    s = _surface(a.surface)
    phi = _potential(a.phi)
    Q = _qgrid(a.Q)
    rep = pressure_gap_report(s, phi, Q, a.delta, sums=_sums(s, phi, Q, cfg, method=a.method))
    return _json_text(cfg, "gap", {"report": rep.to_dict()})


def _equidist_rows(s, phi, f, Q, delta, sums):
    from .thermodynamics import weighted_orbit_average

    rows, prev = [], None
    for q in Q:
        mu = weighted_orbit_average(s, phi, q, delta, f, sums=sums)
        rows.append([q, mu, abs(mu - prev) if prev is not None else "", sums.method])
        prev = mu
    return rows


def cmd_equidist(a, cfg):
    s = _surface(a.surface)
    phi = _potential(a.phi)
    f = _potential(a.f)
    Q = _qgrid(a.Q)
    sums = _sums(s, phi, Q, cfg, f=f, method=a.method)
    rows = _equidist_rows(s, phi, f, Q, a.delta, sums)
    header = ["Q", "mu", "diff", "method"]
    sem = {"mu": "estimate" if sums.method == "transfer" else "exact", "diff": "diagnostic"}
    if a.out == "json":
        return _json_text(cfg, "equidist", {"columns": header, "rows": rows, "semantics": sem})
    return _csv_text(cfg, "equidist", header, rows, sem)


# ---------------------------------------------------------------------------
# report bundle


def build_report(surface_path: str, outdir: Path, cfg: RunConfig, saddle_max: float = 6.0, closed_max: float = 6.0,
                 Q=(4.0, 5.0, 6.0, 7.0, 8.0), delta: float = 0.5, n_traces: int = 20, method: str = "transfer") -> int:
    """Write the experiment bundle; returns the exit status (3 when a budget stopped it early)."""
    from .saddles import build_concat_graph, enumerate_closed_geodesics
    from .thermodynamics import OrbitSums, Potential, pressure_gap_report
    from .tracer import is_straight, trace

    outdir.mkdir(parents=True, exist_ok=True)
    s = _surface(surface_path)
    written = []
    status = {"truncated": False, "reason": None}

    def put(name, text):
        (outdir / name).write_text(text)
        written.append(name)

    try:
        ell0, eta0, theta0 = cone_constants(s)
        put("invariants.json", _json_text(cfg, "report", {
            "name": s.name, "genus": s.genus, "coneClasses": _cone_table(s),
            "gaussBonnetResidual": gauss_bonnet_residual(s), "eta0": eta0, "theta0": theta0, "ell0": ell0}))

        rng = random.Random(cfg.seed)
        rows = []
        k = 0
        while len(rows) < n_traces:
            k += 1
            if k > 50 * n_traces:
                break
            poly = rng.randrange(s.n_polys)
            vs = s.vertices[poly]
            w = [rng.random() for _ in vs]
            z = sum(wi * v for wi, v in zip(w, vs)) / sum(w)
            d = rng.uniform(0.0, 2 * math.pi)
            try:
                p = trace(s, (s.poly_ids[poly], z, d), 20.0)
            except ConeHit:
                continue
            rows.append([len(rows), s.poly_ids[poly], z.real, z.imag, d, is_straight(p)])
        put("trace_checks.csv", _csv_text(cfg, "report", ["i", "poly", "x", "y", "dir", "deviation"], rows,
                                          {"deviation": "measured"}))

        cfg.check_clock("saddle connections")
        g = build_concat_graph(s, max(saddle_max, closed_max, max(Q)), max_pieces=cfg.max_charts)
        if len(g.nodes) > cfg.max_graph_nodes:
            raise WorkLimitExceeded("graph nodes", cfg.max_graph_nodes)
        steps = [0.5 * j for j in range(1, int(2 * saddle_max) + 1)]
        rows = [[L, sum(1 for sc in g.nodes if sc.length <= L + 1e-9)] for L in steps]
        put("saddle_counts.csv", _csv_text(cfg, "report", ["L", "count"], rows, {}))

        cfg.check_clock("closed geodesics")
        cls = enumerate_closed_geodesics(g, closed_max, max_steps=cfg.max_cycles)
        rows = []
        for Qc in range(1, int(closed_max) + 1):
            sel = [c for c in cls if c.period <= Qc + 1e-9]
            reg = sum(1 for c in sel if c.regular)
            rows.append([float(Qc), len(sel), reg, len(sel) - reg])
        put("closed_counts.csv", _csv_text(cfg, "report", ["Q", "all", "regular", "singular"], rows, {}))

        cfg.check_clock("partition sums")
        f = Potential.load(DATA / "f_center.json")
        phi = Potential()
        sums = OrbitSums(g, phi, max(Q), f=f, method=method)
        gap = pressure_gap_report(s, phi, list(Q), delta, sums=sums)
        put("gap.json", _json_text(cfg, "report", {"report": gap.to_dict()}))
        rows = _equidist_rows(s, phi, f, list(Q), delta, sums)
        put("equidist.csv", _csv_text(cfg, "report", ["Q", "mu", "diff", "method"], rows,
                                      {"mu": "estimate" if sums.method == "transfer" else "exact",
                                       "diff": "diagnostic"}))
    except BudgetExceeded as exc:
        status = {"truncated": True, "reason": str(exc)}
    put_manifest = _json_text(cfg, "report", {"files": written, **status,
                                              "parameters": {"saddleMax": saddle_max, "closedMax": closed_max,
                                                             "Q": list(Q), "delta": delta, "traces": n_traces,
                                                             "method": method}})
    (outdir / "manifest.json").write_text(put_manifest)
    return EXIT_BUDGET if status["truncated"] else EXIT_OK


def cmd_report(a, cfg):
    code = build_report(a.surface, Path(a.out), cfg, a.saddle_max, a.closed_max, _qgrid(a.Q), a.delta, a.traces,
                        a.method)
    return code


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flatflow", description="Geodesic flow experiments on flat cone surfaces.")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("surface")
        sp.add_argument("--output", default="-", help="output file (default stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-charts", type=int, default=2_000_000)
        sp.add_argument("--max-graph-nodes", type=int, default=100_000)
        sp.add_argument("--max-cycles", type=int, default=50_000_000)
        sp.add_argument("--wall-clock", type=float, default=3600.0)
        sp.set_defaults(fn=fn)
        return sp

    add("validate", cmd_validate, "check a surface file")
    add("invariants", cmd_invariants, "genus, cone table and constants")
    sp = add("trace", cmd_trace, "trace a geodesic")
    sp.add_argument("--start", required=True, help="poly:x:y")
    sp.add_argument("--dir", type=float, default=None, help="direction in radians")
    sp.add_argument("--len", type=float, required=True)
    sp.add_argument("--backward", type=float, default=0.0)
    sp.add_argument("--at-cone", default="stop")
    sp = add("gsdist", cmd_gsdist, "upper bound for the distance between two traced geodesics")
    sp.add_argument("--trace-a", required=True, help="poly:x:y:dir")
    sp.add_argument("--trace-b", required=True, help="poly:x:y:dir")
    sp.add_argument("--T", type=float, default=10.0)
    sp.add_argument("--at-cone", default="stop")
    sp = add("saddles", cmd_saddles, "list saddle connections")
    sp.add_argument("--max-len", type=float, required=True)
    sp.add_argument("--out", choices=["csv", "json"], default="csv")
    sp = add("closed", cmd_closed, "list closed saddle-connection geodesics")
    sp.add_argument("--max-len", type=float, required=True)
    sp.add_argument("--class", dest="klass", choices=["regular", "singular", "all"], default="all")
    sp.add_argument("--out", choices=["csv", "json"], default="csv")
    sp = add("lambda", cmd_lambda, "lambda profile along a closed geodesic")
    sp.add_argument("--closed", required=True, help="canonical key")
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--max-len", type=float, default=6.0)
    sp.add_argument("--profile-out", default=None)
    sp.add_argument("--samples", type=int, default=200)
    sp = add("decompose", cmd_decompose, "(B, G, B) decomposition of a window")
    sp.add_argument("--closed", required=True)
    sp.add_argument("--window", required=True, help="a:b")
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--max-len", type=float, default=6.0)

    spec = sub.add_parser("spec", help="specification constructions")
    spec_sub = spec.add_subparsers(dest="spec_cmd", parser_class=_Parser)
    for name, arg in (("glue", "--segments"), ("periodic", "--segment")):
        sp = spec_sub.add_parser(name)
        sp.add_argument("surface")
        sp.add_argument(arg, required=True)
        sp.add_argument("--delta", type=float, required=True)
        sp.add_argument("--max-len", type=float, default=6.0)
        sp.add_argument("--loop-qmax", type=float, default=5.0)
        sp.add_argument("--output", default="-")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-charts", type=int, default=2_000_000)
        sp.add_argument("--max-graph-nodes", type=int, default=100_000)
        sp.add_argument("--max-cycles", type=int, default=50_000_000)
        sp.add_argument("--wall-clock", type=float, default=3600.0)
        if name == "glue":
            sp.add_argument("--mode", choices=["weak", "strong"], default="strong")
            sp.add_argument("--report", choices=["json"], default="json")
        sp.set_defaults(fn=cmd_spec)

    for name, fn in (("pressure", cmd_pressure), ("gap", cmd_gap), ("equidist", cmd_equidist)):
        sp = add(name, fn, f"{name} estimate from closed geodesics")
        sp.add_argument("--phi", required=True)
        sp.add_argument("--Q", default="6:14:2")
        sp.add_argument("--delta", type=float, default=0.5)
        sp.add_argument("--method", choices=["auto", "enumerate", "transfer"], default="auto")
        if name == "pressure":
            sp.add_argument("--class", dest="klass", choices=["regular", "singular", "all"], default="regular")
            sp.add_argument("--out", choices=["json"], default="json")
        if name == "equidist":
            sp.add_argument("--f", required=True)
            sp.add_argument("--out", choices=["csv", "json"], default="csv")

    sp = add("report", cmd_report, "write the experiment bundle")
    sp.add_argument("--out", default="report", help="output directory")
    sp.add_argument("--Q", default="4:8:1")
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--saddle-max", type=float, default=6.0)
    sp.add_argument("--closed-max", type=float, default=6.0)
    sp.add_argument("--traces", type=int, default=20)
    sp.add_argument("--method", choices=["auto", "enumerate", "transfer"], default="transfer")
    return p


def run(argv=None) -> int:
    parser = make_parser()
    try:
        a = parser.parse_args(argv)
        if a.cmd is None or (a.cmd == "spec" and a.spec_cmd is None):
            raise UsageError(parser.format_help())
        cfg = RunConfig(a.surface, max_charts=a.max_charts, max_graph_nodes=a.max_graph_nodes,
                        max_cycles=a.max_cycles, wall_clock=a.wall_clock, seed=a.seed,
                        output=getattr(a, "output", "-"))
        out = a.fn(a, cfg)
        if isinstance(out, int):
            return out
        _emit(cfg, out)
        return EXIT_OK
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (ValidationError, InputError) as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_INVALID
    except BudgetExceeded as exc:
        sys.stderr.write(f"budget exhausted: {exc}\n")
        return EXIT_BUDGET
    except (FlatflowError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
