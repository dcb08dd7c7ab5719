import math

import numpy as np
import pytest

from srblab import (BadItinerary, GraphPatch, ManifoldCollapse, NotInOmega0, RegionParams, apply,
                    contraction_certificate, grow_unstable_manifold, multi_step_transform, neutral_cat,
                    one_step_transform, truncation_bounded, verify_tangency)
from srblab import _kernels as K
from srblab.acceptance import sample_points
from srblab.dynamics import E_S, E_U, apply_many, distance_to_S, torus_delta
from srblab.graph_transform import (TruncationLog, _chart_from_axes, _lip, linear_graph, make_chart,
                                    multi_step_radius, zero_graph)
from srblab.splitting import estimate_splitting

from conftest import LAM1, flow_ref


@pytest.fixture(scope="module")
def bounded_points(neu, params):
    return sample_points(neu, 6, params, seed=21, horizon=10**4, bounded=True)


def _graph_dist(patch, pts):
    """Max |s - G(u)| of torus points expressed in the patch chart (|u| within the domain)."""
    off = torus_delta(np.array(patch.base), pts)
    z = off @ np.linalg.inv(patch.P).T
    inside = np.abs(z[:, 0]) <= patch.radius
    return float(np.max(np.abs(z[inside, 1] - patch(z[inside, 0])))), int(inside.sum())


# ------------------------------------------------------------ charts

def test_chart_linear_singular_values(lin):
    ch = make_chart(lin, (0.3, 0.4))
    sv = np.linalg.svd(np.column_stack([E_U, E_S]), compute_uv=False)
    assert abs(ch.K1 - sv[-1]) < 1e-9 and abs(ch.K2 - sv[0]) < 1e-9


def test_chart_radius_rule(neu, params):
    far = (2 * params.eps1 * E_U) % 1.0
    near = (0.5 * params.eps1 * E_U) % 1.0
    assert make_chart(neu, far).rho == params.rho1
    assert make_chart(neu, near).rho == pytest.approx(params.rho1 / 2, rel=1e-12)


# ------------------------------------------------------------ one step

def test_zero_graph_linear(lin):
    p = (0.3, 0.4)
    a = make_chart(lin, p)
    b = make_chart(lin, apply(lin, p, 1))
    g = zero_graph(a, 0.005)
    h = one_step_transform(lin, a, b, g)
    assert np.abs(h.s).max() < 1e-15
    assert h.image_radius == pytest.approx(0.005 * LAM1, rel=1e-12)
    assert h.radius == pytest.approx(0.005 * LAM1, rel=1e-12)
    h = one_step_transform(lin, a, b, zero_graph(a, 0.02))
    assert h.radius == b.rho


def test_sloped_graph_linear(lin):
    p = (0.3, 0.4)
    a = make_chart(lin, p)
    b = make_chart(lin, apply(lin, p, 1))
    g = linear_graph(a, 0.5, 0.005)
    h = one_step_transform(lin, a, b, g)
    # G(u) = lambda^-2 * 0.5 u over [-lambda l, lambda l]: sup scales by lambda^-1
    assert np.abs(h.s).max() == pytest.approx(np.abs(g.s).max() / LAM1, rel=1e-10)
    assert h.lip == pytest.approx(0.5 * LAM1 ** -2, rel=1e-10)
    assert abs(LAM1 ** -2 - 0.1458980338) < 1e-10


def test_neutral_transform_dense_oracle():
    m = neutral_cat(0.03)
    p = tuple((0.055 * E_S + 0.01 * E_U) % 1.0)
    fp = apply(m, p, 1)
    sp, sf = estimate_splitting(m, p), estimate_splitting(m, fp)
    a = _chart_from_axes(apply(m, fp, -1), sp.e_u, sp.e_s, 0.02)
    b = _chart_from_axes(fp, sf.e_u, sf.e_s, 0.02)
    g = zero_graph(a, 0.01)
    assert not K.linear_ball(a.base.x, a.base.y, a.reach(g.radius), 1, m.kr0, 1)
    h = one_step_transform(m, a, b, g)
    u = np.linspace(-g.radius, g.radius, 200)
    img = apply_many(m, g.torus_points(np.column_stack([u, g(u)])), 1)
    err, n = _graph_dist(h, img)
    assert n > 100 and err < 1e-7
    ref = np.array([flow_ref(q, 0.03) for q in g.torus_points(np.column_stack([u, g(u)]))])
    err, n = _graph_dist(h, ref)
    assert n > 100 and err < 1e-7


# ------------------------------------------------------------ multi step

def _excursion_start(m, params, length, seed=0):
    rng = np.random.default_rng(seed)
    while True:
        q = rng.random(2)
        if distance_to_S(m, q) < params.eps1:
            continue
        orb = K.orbit(q[0], q[1], length, m.kr0, m.nsub, 1)
        d = np.hypot(*(orb - np.floor(orb + 0.5)).T)
        if d[-1] >= params.eps1 and np.all(d[1:-1] < params.eps1):
            return tuple(q)


def test_multi_step_n1_matches_one_step(lin, params):
    p = (0.3, 0.4)
    a = make_chart(lin, p)
    b = make_chart(lin, apply(lin, p, 1))
    g = linear_graph(a, 0.2, 0.01)
    with pytest.raises(BadItinerary):
        # n = 1 between two Omega0 points still has to be a valid itinerary; for linear_cat it is
        multi_step_transform(lin, p, 2, g, 1.0, params)
    h1 = multi_step_transform(lin, p, 1, g, 1.0, params, chart_src=a, chart_dst=b)
    rho = multi_step_radius(1, 1.0, params)
    h2 = one_step_transform(lin, a, b, g.restrict(rho))
    h2 = h2.restrict(min(h2.radius, rho))
    assert h1.radius == pytest.approx(h2.radius, rel=1e-10)
    assert np.abs(h1.s - h2.s).max() < 1e-10


def test_multi_step_matches_composition():
    params = RegionParams(C_graph=1e-3)
    m = neutral_cat()
    p = _excursion_start(m, params, 12, seed=1)
    g = zero_graph(make_chart(m, p), params.rho1)
    h = multi_step_transform(m, p, 12, g, 1.0, params, eps=math.inf)
    # composition of single steps along the same orbit
    orb = K.orbit(p[0], p[1], 12, m.kr0, m.nsub, 1)
    gg = g.restrict(multi_step_radius(12, 1.0, params))
    for k in range(12):
        sa = estimate_splitting(m, orb[k])
        sb = estimate_splitting(m, orb[k + 1])
        a = _chart_from_axes(apply(m, orb[k + 1], -1), sa.e_u, sa.e_s, math.inf)
        b = _chart_from_axes(apply(m, orb[k], 1), sb.e_u, sb.e_s, math.inf)
        gg = one_step_transform(m, a, b, gg, check=False)
    u = np.linspace(-h.radius, h.radius, 101)
    pts = h.torus_points(np.column_stack([u, h(u)]))
    err, n = _graph_dist(gg, pts)
    assert n == 101 and err < 1e-6


def test_radius_formula_doubling_K(params):
    a = RegionParams(K=64)
    b = RegionParams(K=128)
    for n in (5, 40, 300):
        da = math.log(a.C_graph) - math.log(multi_step_radius(n, 1.0, a))
        db = math.log(b.C_graph) - math.log(multi_step_radius(n, 1.0, b))
        assert db == pytest.approx(da / 2, rel=1e-12)


def test_bad_itinerary(neu, params):
    g = zero_graph(make_chart(neu, (0.3, 0.4)), 0.01)
    with pytest.raises(BadItinerary):
        multi_step_transform(neu, (0.3, 0.4), 3, g, 1.0, params)
    with pytest.raises(ValueError):
        multi_step_transform(neu, (0.3, 0.4), 3, g, 2.0, params)


# ------------------------------------------------------------ growth

def test_grow_linear(lin, params):
    g, log = grow_unstable_manifold(lin, (0.3, 0.4), 50, params)
    assert g.radius == params.rho1 and np.abs(g.s).max() < 1e-15
    assert log.q == [] and truncation_bounded(log, 50).verdict
    assert verify_tangency(lin, g) < 1e-10


def test_grow_depth_doubling(neu, params, bounded_points):
    for p in bounded_points:
        g3, _ = grow_unstable_manifold(neu, p, 10**3, params)
        g4, log = grow_unstable_manifold(neu, p, 10**4, params)
        assert abs(g3.radius - g4.radius) < 1e-9
        assert log.interlaced()


def test_manifold_collapse_on_trapped_orbit(neu, params):
    # the unstable axis of S is its own backward orbit: trapped forever
    p = (0.06 * E_U) % 1.0
    with pytest.raises(ManifoldCollapse):
        grow_unstable_manifold(neu, p, 1000, params)


def test_grow_rejects_B(neu, params):
    with pytest.raises(NotInOmega0):
        grow_unstable_manifold(neu, (0.01, 0.0), 100, params)


def test_emitted_patches_lip1_and_interlaced(neu, params):
    rng = np.random.default_rng(22)
    for p in rng.random((15, 2)):
        if distance_to_S(neu, p) < params.eps1:
            continue
        g, log = grow_unstable_manifold(neu, p, 3000, params)
        assert g.lip <= 1.0 + 1e-9
        assert log.interlaced()
        assert truncation_bounded(log, 3000).verdict


def test_fixed_point_property(neu, params, bounded_points):
    for p in bounded_points:
        q = apply(neu, p, -1)
        gq, _ = grow_unstable_manifold(neu, q, 4000, params)
        gp, _ = grow_unstable_manifold(neu, p, 4000, params)
        a = _chart_from_axes(gq.base, gq.e_u, gq.e_s, gq.radius)
        b = _chart_from_axes(gp.base, gp.e_u, gp.e_s, params.rho1)
        h = one_step_transform(neu, a, b, gq, check=False)
        l = min(h.radius, gp.radius)
        u = np.linspace(-l, l, 101)
        assert np.abs(h(u) - gp(u)).max() < 1e-8


def test_image_extension(neu, params, bounded_points):
    for p in bounded_points:
        g, _ = grow_unstable_manifold(neu, p, 2000, params)
        fp = apply(neu, p, 1)
        if distance_to_S(neu, fp) < params.eps1:
            continue
        sf = estimate_splitting(neu, fp)
        a = _chart_from_axes(g.base, g.e_u, g.e_s, g.radius)
        b = _chart_from_axes(fp, sf.e_u, sf.e_s, math.inf)
        h = one_step_transform(neu, a, b, g.restrict(g.radius / 2))
        lam_u = math.log(np.linalg.norm(K.step_jac(p[0], p[1], neu.kr0, neu.nsub, 1)[2] @ g.e_u))
        assert h.image_radius > (g.radius / 2) * math.exp(lam_u - 2 * params.eps_hat)


def test_f_compatibility(neu, params, bounded_points):
    for p in bounded_points:
        gp, _ = grow_unstable_manifold(neu, p, 3000, params)
        for k in (1, 2, 3):
            q = apply(neu, p, -k)
            if distance_to_S(neu, q) < params.eps1:
                continue
            gq, _ = grow_unstable_manifold(neu, q, 3000 - k, params)
            u = np.linspace(-gp.radius, gp.radius, 64)
            back = apply_many(neu, gp.torus_points(np.column_stack([u, gp(u)])), -k)
            err, n = _graph_dist(gq, back)
            assert n > 0 and err < 1e-6


# ------------------------------------------------------------ checks

def test_tangency_examples(lin, neu, params, bounded_points):
    g, _ = grow_unstable_manifold(lin, (0.3, 0.4), 50, params)
    assert verify_tangency(lin, g) < 1e-10
    for p in bounded_points:
        g, _ = grow_unstable_manifold(neu, p, 2000, params)
        assert verify_tangency(neu, g, 64) < 1e-4
    two = GraphPatch(g.base, g.radius, np.array([[-g.radius, 0.0], [g.radius, 0.1 * g.radius]]), 0.1,
                     g.e_u, g.e_s)
    sp = estimate_splitting(neu, g.base)
    chord = two.P @ np.array([2 * g.radius, 0.1 * g.radius])
    expected = math.acos(abs(chord @ sp.e_u) / np.linalg.norm(chord))
    assert verify_tangency(neu, two) == pytest.approx(expected, abs=1e-12)


def test_contraction_linear(lin, params):
    ch = make_chart(lin, (0.3, 0.4))
    c = contraction_certificate(lin, (0.3, 0.4), linear_graph(ch, 0.3), linear_graph(ch, -0.2), 6, params)
    assert np.abs(c.sup_ratios - 1 / LAM1).max() < 1e-8
    assert np.abs(c.lip_ratios - LAM1 ** -2).max() < 1e-8
    assert abs(1 / LAM1 - 0.38196601) < 1e-8


def test_contraction_neutral_bound(neu, params):
    rng = np.random.default_rng(23)
    done = 0
    while done < 5:
        p = tuple(rng.random(2))
        orb = K.orbit(p[0], p[1], 8, neu.kr0, neu.nsub, 1)
        if np.any(np.hypot(*(orb - np.floor(orb + 0.5)).T) < params.eps1):
            continue
        ch = make_chart(neu, p)
        c = contraction_certificate(neu, p, linear_graph(ch, 0.2, 0.01), linear_graph(ch, -0.1, 0.01), 8, params)
        assert np.all(c.lip_ratios <= c.bounds)
        done += 1


def test_truncation_bounded_empty():
    assert truncation_bounded(TruncationLog(), 100).verdict
    assert TruncationLog().interlaced()


def test_patch_lip_is_chord_max():
    u = np.linspace(-1, 1, 5)
    s = np.array([0.0, 0.1, 0.0, 0.3, 0.3])
    assert _lip(u, s) == pytest.approx(0.6)
