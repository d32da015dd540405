import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_pairs, integer_sandwich

from flatflow.errors import ConnectorNotFound, Infeasible, NotInG, TauTooSmall
from flatflow.saddles import enumerate_closed_geodesics
from flatflow.specification import (bowen_check, coincide, delta_dense_coeffs, extend_to_saddle_path, fan_bound,
                                    glue_segments, good_segments, loop_pair, periodic_approximation,
                                    similar_length_pair, tune_connector)
from flatflow.thermodynamics import Potential
from flatflow.tracer import flow_shift


def test_fan_bound(octagon):
    assert fan_bound(octagon) == 4
    assert fan_bound(math.pi / 2) == 11
    assert fan_bound(2 * math.pi) == 5


def test_dense_example():
    co = delta_dense_coeffs(3, 2, 10, 0)
    assert (co.m1, co.m2) == (1, 4)
    assert (1, 4) in dense_pairs(Fraction(3), Fraction(2), Fraction(10), Fraction(11))


def test_dense_tau_too_small():
    with pytest.raises(TauTooSmall):
        delta_dense_coeffs(3, 2, 1, 0)


_frac = st.builds(Fraction, st.integers(1, 400), st.integers(1, 40))


@settings(max_examples=200, deadline=None)
@given(_frac, _frac, st.integers(0, 60), st.integers(0, 5))
def test_dense_against_exhaustive(a, b, extra, n):
    x, y = max(a, b), min(a, b)
    if x == y:
        return
    d = x - y
    T = max((math.floor(y / d + 2) + 1) * y, Fraction(1))
    tau = T + Fraction(extra, 7)
    co = delta_dense_coeffs(x, y, tau, n)
    assert integer_sandwich(x, y, tau, n, co.m1, co.m2)
    lo, hi = tau + n * d, tau + (n + 1) * d
    if hi / y < 5000:
        assert (co.m1, co.m2) in dense_pairs(x, y, lo, hi)


def test_extend_trims_to_cone_events(oct_graph12, cfg):
    seg, t, cg, u = good_segments(oct_graph12, cfg, 8.0, 1)[0]
    sp = extend_to_saddle_path(seg, t, 0.5, cfg, oct_graph12)
    assert 0 <= sp.s0 < sp.s1 <= t
    ev = [e.t for e in seg.events_between(0, t) if abs(e.theta) > math.pi + 1e-9]
    assert sp.s0 == pytest.approx(ev[0]) and sp.s1 == pytest.approx(ev[-1])
    assert sp.shadow == pytest.approx(math.exp(-(sp.s1 - sp.s0)))
    with pytest.raises(ConnectorNotFound):
        extend_to_saddle_path(seg, t, 1e-12, cfg, oct_graph12)


def test_not_in_g(oct_graph6, cfg):
    cg = enumerate_closed_geodesics(oct_graph6, 3.0, "singular")[0]
    from flatflow.saddles import closed_path

    p = closed_path(oct_graph6, cg)
    with pytest.raises(NotInG):
        glue_segments([(p, 4.0)], 0.5, cfg, oct_graph6)


def test_similar_length_pair(oct_graph6):
    a, b = similar_length_pair(oct_graph6, 0.05, 6.0)
    assert 0 < b.period - a.period < 0.05


def test_tune_connector_identity(oct_graph12):
    g = oct_graph12
    loops = loop_pair(g, 0.125, 5.0)
    src, dst = 0, 5
    with pytest.raises(Infeasible) as exc:
        tune_connector(g, src, dst, 1.0 + 1e-3, 0.125, loops)
    target = exc.value.threshold + 3.3
    con = tune_connector(g, src, dst, target, 0.125, loops)
    assert target - 1e-9 <= con.length <= target + 0.125 + 1e-9
    assert con.path[0] == src and con.path[-1] == dst
    assert all(g.adj[i, j] for i, j in zip(con.path, con.path[1:]))
    x, y = loops[0].period, loops[1].period
    assert con.length == pytest.approx(con.base_length + con.k1 * x + con.k2 * y, abs=1e-9)


@pytest.fixture(scope="module")
def segments(oct_graph12, cfg):
    return good_segments(oct_graph12, cfg, 8.0, 3)


def test_weak_and_strong_glue(segments, oct_graph12, cfg):
    segs = [(p, t) for p, t, _, _ in segments[:2]]
    for mode in ("weak", "strong"):
        rep = glue_segments(segs, 0.5, cfg, oct_graph12, mode)
        assert rep.closed.regular
        for i, (p, t) in enumerate(segs):
            a, b = rep.copied[i]
            assert coincide(p, a, rep.path, rep.starts[i] + a, b - a) <= 1e-9
    strong = glue_segments(segs, 0.5, cfg, oct_graph12, "strong")
    assert max(strong.transitions) - min(strong.transitions) <= 0.5 / 4 + 1e-9


def test_two_copies_of_one_segment(segments, oct_graph12, cfg):
    p, t, _, _ = segments[0]
    rep = glue_segments([(p, t), (p, t)], 0.5, cfg, oct_graph12)
    (a0, b0), (a1, b1) = rep.copied
    assert coincide(p, a0, rep.path, rep.starts[0] + a0, b0 - a0) <= 1e-9
    assert coincide(p, a1, rep.path, rep.starts[1] + a1, b1 - a1) <= 1e-9
    w0 = (rep.starts[0] + a0) % rep.period
    w1 = (rep.starts[1] + a1) % rep.period
    assert abs(w0 - w1) >= b0 - a0 - 1e-9


def test_periodic_approximation(segments, oct_graph12, cfg):
    p, t, _, _ = segments[0]
    pa = periodic_approximation(p, t, 0.5, cfg, oct_graph12)
    lo, hi = pa.window
    assert lo - 1e-9 <= pa.period <= hi + 1e-9
    assert pa.closed.regular
    a, b = pa.report.copied[0]
    assert coincide(p, a, pa.report.path, pa.report.starts[0] + a, b - a) <= 1e-9


def test_bowen_bound(segments, oct_graph12, cfg, octagon):
    p, t, _, _ = segments[0]
    rep = glue_segments([(p, t)], 0.5, cfg, oct_graph12)
    for name in ("phi_zero", "phi_tilt", "f_center"):
        d, K = bowen_check(Potential.load(name + ".json"), octagon, p, t, rep)
        assert d <= K + 1e-9
