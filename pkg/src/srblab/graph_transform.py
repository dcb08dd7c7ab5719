"""Charts, graph transforms and growth of local unstable manifolds."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels as K
from .dynamics import A_hat as _A_hat
from .dynamics import E_S, E_U, MapModel, TorusPoint, _pt, distance_to_S, orbit_tangents
from .errors import BadItinerary, DomainCollapse, HypothesisViolated, ManifoldCollapse, NotInOmega0
from .hyperbolicity import RegionParams
from .splitting import DEFAULT_DEPTH, backward_trace, estimate_splitting, trace_orbit

N_SAMPLES = 257
COLLAPSE_RADIUS = 1e-12
LIP_TOL = 1e-9


@dataclass(frozen=True)
class Chart:
    base: TorusPoint
    e_u: np.ndarray
    e_s: np.ndarray
    rho: float
    K1: float
    K2: float

    @property
    def P(self):
        return np.column_stack([self.e_u, self.e_s])

    @property
    def Pinv(self):
        return np.linalg.inv(self.P)

    def embed(self, z):
        """phi_x(z) on the torus, z of shape (..., 2)."""
        z = np.asarray(z, dtype=float)
        w = z @ self.P.T + np.array([self.base.x, self.base.y])
        return w - np.floor(w)

    def reach(self, l):
        # largest torus displacement of the chart square [-l, l]^2
        return l * max(np.linalg.norm(self.e_u + self.e_s), np.linalg.norm(self.e_u - self.e_s))


def _chart_from_axes(base, eu, es, rho):
    sv = np.linalg.svd(np.column_stack([eu, es]), compute_uv=False)
    return Chart(base, np.asarray(eu, float), np.asarray(es, float), float(rho), float(sv[-1]), float(sv[0]))


def chart_radius(model, p, rho1, eps1):
    d = distance_to_S(model, p)
    return rho1 if d >= eps1 else rho1 * d / eps1


def make_chart(model, p, rho1=0.02, eps1=0.05, depth=DEFAULT_DEPTH, split=None) -> Chart:
    p = _pt(p)
    if split is None:
        split = estimate_splitting(model, p, depth)
    return _chart_from_axes(p, split.e_u, split.e_s, chart_radius(model, p, rho1, eps1))


@dataclass
class GraphPatch:
    base: TorusPoint
    radius: float
    samples: np.ndarray
    lip: float
    e_u: np.ndarray = field(default_factory=lambda: E_U.copy())
    e_s: np.ndarray = field(default_factory=lambda: E_S.copy())
    image_radius: float = math.nan

    @property
    def u(self):
        return self.samples[:, 0]

    @property
    def s(self):
        return self.samples[:, 1]

    @property
    def n_samples(self):
        return len(self.samples)

    @property
    def P(self):
        return np.column_stack([self.e_u, self.e_s])

    @functools.cached_property
    def _interp(self):
        return CubicSpline(self.u, self.s)

    def __call__(self, u):
        return self._interp(u)

    def slope(self, u):
        return self._interp.derivative()(u)

    def restrict(self, l, n=None):
        n = n or self.n_samples
        l = min(float(l), self.radius)
        grid = np.linspace(-l, l, n)
        g = self(grid)
        g[n // 2] = 0.0
        return GraphPatch(self.base, l, np.column_stack([grid, g]), _lip(grid, g), self.e_u, self.e_s)

    def torus_points(self, z=None):
        z = self.samples if z is None else z
        w = z @ self.P.T + np.array([self.base.x, self.base.y])
        return w - np.floor(w)

    def offsets(self, z=None):
        z = self.samples if z is None else z
        return z @ self.P.T

    def tangents(self, u):
        t = np.column_stack([np.ones_like(u), self.slope(u)]) @ self.P.T
        return t / np.linalg.norm(t, axis=1, keepdims=True)


def zero_graph(chart, radius=None, n=N_SAMPLES):
    l = chart.rho if radius is None else radius
    grid = np.linspace(-l, l, n)
    return GraphPatch(chart.base, l, np.column_stack([grid, np.zeros(n)]), 0.0, chart.e_u, chart.e_s)


def linear_graph(chart, slope, radius=None, n=N_SAMPLES):
    l = chart.rho if radius is None else radius
    grid = np.linspace(-l, l, n)
    g = slope * grid
    g[n // 2] = 0.0
    return GraphPatch(chart.base, l, np.column_stack([grid, g]), abs(slope), chart.e_u, chart.e_s)


def _lip(u, s):
    if len(u) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(s) / np.diff(u))))


# ------------------------------------------------------------- transforms

def _chain_derivative(model, p, n):
    _, jacs = orbit_tangents(model, p, n)
    D = np.eye(2)
    for j in jacs:
        D = j @ D
    return D


def _push_offsets(model, base, off, n):
    bx, by, ox, oy = K.propagate_offsets(base.x, base.y, off[:, 0].copy(), off[:, 1].copy(),
                                         int(n), model.kr0, model.nsub, 1)
    return TorusPoint(bx, by), np.column_stack([ox, oy])


def _nonlinearity(model, src, dst, l, n, T, k=9):
    """Lip(F - T) / |T e_1| sampled on a k x k grid of the square ball."""
    a = np.linspace(-l, l, k)
    Z = np.array([(u, s) for u in a for s in a])
    _, W = _push_offsets(model, src.base, Z @ src.P.T, n)
    R = (W @ dst.Pinv.T - Z @ T.T).reshape(k, k, 2)
    h = a[1] - a[0]
    du = np.linalg.norm(np.diff(R, axis=0), axis=2) / h
    ds = np.linalg.norm(np.diff(R, axis=1), axis=2) / h
    return float(max(du.max(), ds.max()) / np.linalg.norm(T[:, 0]))


def _transform(model, src: Chart, dst: Chart, g: GraphPatch, n, cap, eps, check=True):
    z = g.samples
    off = z @ src.P.T
    linear = bool(K.linear_ball(src.base.x, src.base.y, src.reach(g.radius), int(n), model.kr0, 1))
    if linear:
        A = np.linalg.matrix_power(np.array([[2.0, 1.0], [1.0, 1.0]]), int(n))
        T = dst.Pinv @ A @ src.P
        W = z @ T.T
    else:
        T = dst.Pinv @ _chain_derivative(model, src.base, n) @ src.P
        if check and eps is not None:
            nl = _nonlinearity(model, src, dst, g.radius, n, T)
            if nl >= eps:
                raise HypothesisViolated(f"Lip(F - dF(0)) / |dF(0)e_u| = {nl:.3e} >= {eps:.3e}")
        _, D = _push_offsets(model, src.base, off, n)
        W = D @ dst.Pinv.T
    U, S = W[:, 0], W[:, 1]
    mid = len(U) // 2
    U[mid] = 0.0
    S[mid] = 0.0
    if not np.all(np.diff(U) > 0):
        raise HypothesisViolated("projection of the image graph on the unstable axis is not monotone")
    l_img = float(min(U[-1], -U[0]))
    if not l_img > 0:
        raise DomainCollapse("image covers no symmetric neighbourhood of 0")
    l_new = min(l_img, cap)
    grid = np.linspace(-l_new, l_new, len(U))
    G = CubicSpline(U, S)(grid)
    G[mid] = 0.0
    lip = _lip(grid, G)
    if lip > 1.0 + LIP_TOL:
        raise HypothesisViolated(f"image graph leaves Lip1 (lip = {lip:.6f})")
    return GraphPatch(dst.base, l_new, np.column_stack([grid, G]), lip, dst.e_u, dst.e_s, l_img)


def one_step_transform(model, chart_src: Chart, chart_dst: Chart, g: GraphPatch, eps=None, check=True):
    """Image of graph(g) under f in charts; radius clamped to chart_dst.rho."""
    return _transform(model, chart_src, chart_dst, g, 1, chart_dst.rho, eps, check)


def multi_step_radius(n, r, params):
    return params.C_graph * r * math.exp(-params.radius_rate * n)


def _itinerary_ok(model, p, n, params):
    pts = K.orbit(p.x, p.y, int(n), model.kr0, model.nsub, 1)
    d = np.hypot(*(pts - np.floor(pts + 0.5)).T) if model.has_S else np.full(len(pts), np.inf)
    return d[0] >= params.eps1 and d[-1] >= params.eps1 and np.all(d[1:-1] < params.eps1), pts


def multi_step_transform(model, p, n, g: GraphPatch, r, params: RegionParams, eps=None,
                         chart_src=None, chart_dst=None, depth=DEFAULT_DEPTH):
    """n-fold map as a single transform on the ball of radius C r e^{-(9 lam / 2K) n}."""
    p = _pt(p)
    n = int(n)
    if not (0 < r <= 1):
        raise ValueError("r must lie in (0, 1]")
    ok, pts = _itinerary_ok(model, p, n, params)
    if not ok:
        raise BadItinerary(f"itinerary of length {n} does not run Omega0 -> B(S, eps1) -> Omega0")
    if chart_src is None:
        chart_src = make_chart(model, p, params.rho1, params.eps1, depth)
    if chart_dst is None:
        chart_dst = make_chart(model, pts[-1], params.rho1, params.eps1, depth)
    rho = multi_step_radius(n, r, params)
    gg = g.restrict(rho) if g.radius > rho else g
    eps = params.eps_hat if eps is None else eps
    return _transform(model, chart_src, chart_dst, gg, n, min(gg.radius, chart_dst.rho), eps)


# ------------------------------------------------------------- growth

@dataclass
class TruncationLog:
    q: list = field(default_factory=list)
    p: list = field(default_factory=list)
    m: list = field(default_factory=list)
    lf: list = field(default_factory=list)
    lb: list = field(default_factory=list)
    i_of_n: list = field(default_factory=list)
    truncated: list = field(default_factory=list)
    A_hat: float = K.LAMBDA1
    lam: float = 0.3
    K: float = 64.0

    def interlaced(self):
        seq = []
        for a, b in zip(self.q, self.p):
            seq += [a, b]
        return all(x < y for x, y in zip(seq[0::2], seq[1::2])) and all(
            x <= y for x, y in zip(seq[1::2], seq[2::2])) and (not seq or seq[0] >= 0)


@functools.lru_cache(maxsize=8)
def _cached_A_hat(model):
    return _A_hat(model)


def _excursions(inb, depth):
    """(q, p) pairs of maximal runs inside B along the backward orbit."""
    out = []
    k = 1
    while k <= depth:
        if inb[k] and not inb[k - 1]:
            j = k
            while j <= depth and inb[j]:
                j += 1
            if j > depth:
                break
            out.append((k - 1, j))
            k = j
        else:
            k += 1
    return out


def _i_of_n(omega0, exc, fac, lf, rho1, depth):
    """i(n) for every start depth from the scalar length recursion."""
    at_p = {p: j for j, (_, p) in enumerate(exc)}
    fresh = np.full(depth + 1, -1, dtype=np.int64)
    valid = np.zeros(depth + 1, dtype=bool)
    for k0 in range(depth + 1):
        if not omega0[k0]:
            continue
        valid[k0] = True
        k, L, last = k0, rho1, -1
        while k > 0:
            if k in at_p:
                j = at_p[k]
                if L > lf[j]:
                    last = j
                L = min(L, lf[j])
                k = exc[j][0]
                continue
            L2 = fac[k] * L
            k -= 1
            if L2 >= rho1:
                if fresh[k] >= 0:
                    last = fresh[k]
                break
            L = L2
        fresh[k0] = last
    out = np.full(depth + 1, -1, dtype=np.int64)
    cur = -1
    for k in range(depth + 1):
        if valid[k]:
            cur = fresh[k]
        out[k] = cur
    return out


def grow_unstable_manifold(model, p, depth, params: RegionParams, n_samples=N_SAMPLES,
                           extra=DEFAULT_DEPTH, eps=None):
    """Compose graph transforms along x_depth -> ... -> x_0 = p from the zero graph."""
    p = _pt(p)
    depth = int(depth)
    if distance_to_S(model, p) < params.eps1:
        raise NotInOmega0("base point lies in B(S, eps1)")
    eps = params.eps_hat if eps is None else eps
    pts, eu, es, _ = backward_trace(model, p, depth, extra)
    if model.has_S:
        dS = np.hypot(*(pts - np.floor(pts + 0.5)).T)
    else:
        dS = np.full(depth + 1, np.inf)
    inb = dS < params.eps1
    omega0 = ~inb
    exc = _excursions(inb, depth)
    log = TruncationLog(A_hat=_cached_A_hat(model), lam=params.lam, K=params.K)
    for a, b in exc:
        lval = multi_step_radius(b - a, 1.0, params)
        log.q.append(a)
        log.p.append(b)
        log.m.append(b - a)
        log.lf.append(lval)
        log.lb.append(lval)
        log.truncated.append(False)
    starts = np.nonzero(omega0[:depth + 1])[0]
    n0 = int(starts.max())
    charts = {}

    def chart(k):
        if k not in charts:
            charts[k] = _chart_from_axes(TorusPoint(*pts[k]), eu[k], es[k],
                                         params.rho1 if omega0[k] else params.rho1 * dS[k] / params.eps1)
        return charts[k]

    if n0 == 0:
        # the whole backward orbit up to depth stays in B(S, eps1)
        l0 = multi_step_radius(depth, 1.0, params)
        if l0 < COLLAPSE_RADIUS:
            raise ManifoldCollapse(f"backward orbit trapped near S for {depth} steps; radius {l0:.3e}")
        log.i_of_n = [-1] * (depth + 1)
        return zero_graph(chart(0), l0, n_samples), log
    at_p = {b: j for j, (_, b) in enumerate(exc)}
    fac = np.ones(depth + 1)
    # steps x_k -> x_{k-1} between Omega0 points whose whole chart ball moves
    # by the cat map; these are chained inside one compiled call
    P = np.stack([eu, es], axis=2)
    Pinv = np.linalg.inv(P)
    reach = params.rho1 * np.maximum(np.linalg.norm(eu + es, axis=1), np.linalg.norm(eu - es, axis=1))
    cert = np.zeros(depth + 1, dtype=bool)
    cert[1:] = omega0[1:] & omega0[:-1] & (dS[1:] > K.LAMBDA1 * model.kr0 + reach[1:])
    cat = np.array([[2.0, 1.0], [1.0, 1.0]])
    g = zero_graph(chart(n0), params.rho1, n_samples)
    k = n0
    while k > 0:
        if k in at_p:
            j = at_p[k]
            a = exc[j][0]
            if g.radius > log.lf[j]:
                log.truncated[j] = True
                g = g.restrict(log.lf[j])
            g = _transform(model, chart(k), chart(a), g, k - a, min(g.radius, chart(a).rho), eps)
            k = a
        elif cert[k]:
            k1 = k
            while k1 > 0 and cert[k1] and k1 not in at_p:
                k1 -= 1
            ks = np.arange(k, k1, -1)
            Ts = Pinv[ks - 1] @ cat @ P[ks]
            caps = np.full(len(ks), params.rho1)
            u, sv, img, status = K.linear_run(g.u.copy(), g.s.copy(), Ts, caps, LIP_TOL)
            if status >= 0:
                raise HypothesisViolated(f"linear graph transform failed at depth {ks[status]}")
            fac[ks[0]] = img[0] / g.radius
            fac[ks[1:]] = img[1:] / np.minimum(img[:-1], caps[:-1])
            g = GraphPatch(chart(k1).base, float(u[-1]), np.column_stack([u, sv]), _lip(u, sv),
                           chart(k1).e_u, chart(k1).e_s, float(img[-1]))
            k = k1
        else:
            src = g.radius
            g = _transform(model, chart(k), chart(k - 1), g, 1, chart(k - 1).rho, eps)
            fac[k] = g.image_radius / src
            k -= 1
    if g.radius < COLLAPSE_RADIUS:
        raise ManifoldCollapse(f"final radius {g.radius:.3e} < {COLLAPSE_RADIUS}")
    log.i_of_n = [int(v) for v in _i_of_n(omega0, exc, fac, log.lf, params.rho1, depth)]
    return g, log


class TruncationVerdict(NamedTuple):
    verdict: bool
    gamma_hat: float


def truncation_bounded(log: TruncationLog, depth) -> TruncationVerdict:
    lam, Kc = log.lam, log.K
    gamma = (math.log(log.A_hat) - lam / 2) / (lam / 2 - lam / Kc)
    i_n = np.asarray(log.i_of_n[: int(depth) + 1], dtype=np.int64)
    if len(i_n) == 0:
        return TruncationVerdict(True, gamma)
    half = i_n[: int(depth) // 2 + 1]
    return TruncationVerdict(bool(i_n.max() == half.max()), gamma)


# ------------------------------------------------------------- checks

def verify_tangency(model, patch: GraphPatch, samples=64, depth=DEFAULT_DEPTH):
    """Max angle between the patch tangent and e_u at sampled patch points."""
    l = patch.radius
    if patch.n_samples == 2:
        chord = patch.P @ (patch.samples[1] - patch.samples[0])
        sp = estimate_splitting(model, patch.base, depth)
        return float(K.line_angle(chord[0], chord[1], sp.e_u[0], sp.e_u[1]))
    u = np.linspace(-l, l, int(samples))
    z = np.column_stack([u, patch(u)])
    pts = patch.torus_points(z)
    tang = patch.tangents(u)
    worst = 0.0
    for q, t in zip(pts, tang):
        sp = estimate_splitting(model, q, depth)
        worst = max(worst, float(K.line_angle(t[0], t[1], sp.e_u[0], sp.e_u[1])))
    return worst


class ContractionCertificate(NamedTuple):
    sup_ratios: np.ndarray
    lip_ratios: np.ndarray
    bounds: np.ndarray


def _sup_lip(a: GraphPatch, b: GraphPatch):
    d = a.s - b.s
    return float(np.abs(d).max()), _lip(a.u, d)


def contraction_certificate(model, p, g1: GraphPatch, g2: GraphPatch, steps, params=None, depth=DEFAULT_DEPTH):
    """Per-step sup-norm and Lipschitz ratios between two transformed graphs.

    Sup ratios compare the image over the image of the source domain; the
    domain is then reset to the source radius for the next step."""
    params = params or RegionParams()
    p = _pt(p)
    l = min(g1.radius, g2.radius)
    g1 = g1.restrict(l)
    g2 = g2.restrict(l)
    tr = trace_orbit(model, p, int(steps), depth)
    pts = tr.points
    if model.has_S and np.any(np.hypot(*(pts - np.floor(pts + 0.5)).T) < params.eps1):
        raise BadItinerary("orbit segment leaves Omega0")
    sr, lr, bd = [], [], []
    for k in range(int(steps)):
        src = _chart_from_axes(TorusPoint(*pts[k]), tr.e_u[k], tr.e_s[k], math.inf)
        dst = _chart_from_axes(TorusPoint(*pts[k + 1]), tr.e_u[k + 1], tr.e_s[k + 1], math.inf)
        h1 = _transform(model, src, dst, g1, 1, math.inf, params.eps_hat)
        h2 = _transform(model, src, dst, g2, 1, math.inf, params.eps_hat)
        L = min(h1.radius, h2.radius)
        h1, h2 = h1.restrict(L), h2.restrict(L)
        s0, l0 = _sup_lip(g1, g2)
        s1, l1 = _sup_lip(h1, h2)
        sr.append(s1 / s0)
        lr.append(l1 / l0)
        lam_u = -tr.logs_u[k]
        lam_s = -tr.logs_s[k]
        bd.append(math.exp(-(lam_u + lam_s) + 4 * params.eps_hat))
        g1, g2 = h1.restrict(l), h2.restrict(l)
    return ContractionCertificate(np.array(sr), np.array(lr), np.array(bd))
