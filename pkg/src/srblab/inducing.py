"""Hyperbolic-time returns, induced measures, distortion and spreading."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .dynamics import E_S, MapModel, TorusPoint, _pt, apply_many, distance_to_S, kappa_hat, torus_distances
from .errors import DegenerateSeed, NoReturn, NotIntegrable, TooFewSamples
from .graph_transform import GraphPatch
from .hyperbolicity import RegionParams
from .splitting import DEFAULT_DEPTH, SEED_VECTOR, estimate_splitting

BINS = 32
DEFAULT_CAP = 10**5
BURN_IN = 10


def make_rng(seed):
    # counter-based generator: stream position i is particle i
    return np.random.Generator(np.random.Philox(int(seed)))


class InducedReturn(NamedTuple):
    start: TorusPoint
    tau: int
    end: TorusPoint
    is_hyperbolic_time: bool = True


class ReturnSample:
    """Struct-of-arrays store of induced returns."""

    def __init__(self, starts, taus, ends):
        self.starts = np.asarray(starts, dtype=float).reshape(-1, 2)
        self.taus = np.asarray(taus, dtype=np.int64)
        self.ends = np.asarray(ends, dtype=float).reshape(-1, 2)

    @classmethod
    def from_returns(cls, returns):
        returns = list(returns)
        if not returns:
            return cls(np.empty((0, 2)), np.empty(0, dtype=np.int64), np.empty((0, 2)))
        return cls([r.start for r in returns], [r.tau for r in returns], [r.end for r in returns])

    @classmethod
    def concat(cls, parts):
        return cls(np.concatenate([p.starts for p in parts]), np.concatenate([p.taus for p in parts]),
                   np.concatenate([p.ends for p in parts]))

    def __len__(self):
        return len(self.taus)

    def __getitem__(self, i):
        return InducedReturn(TorusPoint(*self.starts[i]), int(self.taus[i]), TorusPoint(*self.ends[i]), True)

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _as_sample(returns):
    return returns if isinstance(returns, ReturnSample) else ReturnSample.from_returns(returns)


@dataclass
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def total(self):
        return float(math.fsum(self.weights))

    def __len__(self):
        return len(self.weights)

    def normalized(self):
        return EmpiricalMeasure(self.points, self.weights / self.total, dict(self.meta))

    def histogram(self, bins=BINS):
        return histogram(self.points, self.weights, bins)

    def integrate(self, phi):
        return float(np.dot(self.weights, phi(self.points)) / self.total)


def histogram(points, weights=None, bins=BINS):
    """Normalized bins x bins occupation matrix on [0,1)^2, row index = x cell."""
    h, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=bins, range=[[0, 1], [0, 1]], weights=weights)
    return h / h.sum()


def l1(a, b):
    return float(np.abs(a - b).sum())


# ------------------------------------------------------------------ induce

def _batch(model, xs, ys, vx, vy, params, cap, look):
    v0x, v0y = SEED_VECTOR
    return K.induce_batch(xs, ys, vx, vy, math.log(params.r0_time), params.eps1, params.thr, int(cap),
                          int(look), model.kr0, model.nsub, model.has_S, v0x, v0y)


def induce(model, p, params: RegionParams, cap=DEFAULT_CAP, depth=DEFAULT_DEPTH, e_u=None) -> InducedReturn:
    """First r0-hyperbolic time of p whose endpoint is Omega3-tagged."""
    p = _pt(p)
    if e_u is None:
        e_u = estimate_splitting(model, p, depth).e_u
    taus, ox, oy, _, _ = _batch(model, np.array([p.x]), np.array([p.y]), np.array([e_u[0]]),
                                np.array([e_u[1]]), params, cap, depth)
    if taus[0] == 0:
        raise NoReturn(f"no hyperbolic return within {cap} steps")
    return InducedReturn(p, int(taus[0]), TorusPoint(ox[0], oy[0]), True)


def seed_particles(patch: GraphPatch, n, rng, fine=4097):
    """Arclength-uniform points on the patch with their unit tangents."""
    l = patch.radius
    uf = np.linspace(-l, l, fine)
    off = patch.offsets(np.column_stack([uf, patch(uf)]))
    seg = np.hypot(*np.diff(off, axis=0).T)
    cdf = np.concatenate([[0.0], np.cumsum(seg)])
    cdf /= cdf[-1]
    u = np.interp(rng.random(n), cdf, uf)
    pts = patch.torus_points(np.column_stack([u, patch(u)]))
    return pts, patch.tangents(u)


def cesaro_prefix(mu: EmpiricalMeasure, n_generations):
    """The Cesaro measure that push_measure would emit after fewer generations."""
    b = mu.meta["burn_in"]
    k = int(n_generations) - b
    if k < 1 or k > len(mu.meta["gen_counts"]):
        raise ValueError("prefix outside the recorded generations")
    stop = int(np.sum(mu.meta["gen_counts"][:k]))
    w = np.full(stop, 1.0 / (mu.meta["n_particles"] * k))
    meta = dict(mu.meta, generation=int(n_generations), gen_counts=mu.meta["gen_counts"][:k], snapshots={})
    return EmpiricalMeasure(mu.points[:stop], w, meta)


def push_measure(model, seed_patch: GraphPatch, n_particles, n_generations, params: RegionParams,
                 cap=DEFAULT_CAP, seed=0, burn_in=BURN_IN, depth=DEFAULT_DEPTH, keep_generations=()):
    """Cesaro average of g^i_* Leb^u over generations burn_in..n_generations-1.

    Returns the measure and the ReturnSample aligned with its particles."""
    n_particles = int(n_particles)
    if n_particles < 1000:
        raise DegenerateSeed(f"n_particles = {n_particles} < 1000")
    if seed_patch.n_samples < 21 or seed_patch.radius < 1e-12:
        raise DegenerateSeed("seed patch radius below 10 grid spacings")
    if n_generations < 1:
        raise ValueError("n_generations must be >= 1")
    b = burn_in if n_generations > burn_in else 0
    rng = make_rng(seed)
    pts, tang = seed_particles(seed_patch, n_particles, rng)
    xs, ys = pts[:, 0].copy(), pts[:, 1].copy()
    vx, vy = tang[:, 0].copy(), tang[:, 1].copy()
    alive = n_particles
    kept_s, kept_t, kept_e = [], [], []
    snaps = {}
    leaked = 0
    for gen in range(n_generations):
        if gen in keep_generations:
            snaps[gen] = np.column_stack([xs, ys])
        taus, ox, oy, ovx, ovy = _batch(model, xs, ys, vx, vy, params, cap, depth)
        ok = taus > 0
        leaked += int(np.count_nonzero(~ok))
        if gen >= b:
            kept_s.append(np.column_stack([xs[ok], ys[ok]]))
            kept_t.append(taus[ok])
            kept_e.append(np.column_stack([ox[ok], oy[ok]]))
        xs, ys, vx, vy = ox[ok], oy[ok], ovx[ok], ovy[ok]
        alive = len(xs)
        if alive == 0:
            break
    if n_generations in keep_generations:
        snaps[n_generations] = np.column_stack([xs, ys])
    G = n_generations - b
    counts = [len(t) for t in kept_t]
    if not kept_s:
        kept_s, kept_t, kept_e = [np.empty((0, 2))], [np.empty(0, dtype=np.int64)], [np.empty((0, 2))]
    rs = ReturnSample(np.concatenate(kept_s), np.concatenate(kept_t), np.concatenate(kept_e))
    w = np.full(len(rs), 1.0 / (n_particles * G))
    meta = {"kind": "induced_mu", "generation": int(n_generations), "seed": int(seed), "burn_in": int(b),
            "leakage": leaked / n_particles, "n_particles": n_particles, "gen_counts": counts,
            "snapshots": snaps}
    return EmpiricalMeasure(rs.starts, w, meta), rs


# -------------------------------------------------------------- distortion

class DistortionReport(NamedTuple):
    n: int
    max_log_ratio: float
    omega0_hat: float
    chi1_hat: float
    kappa_hat: float = math.nan
    empty: bool = False
    by_n: Optional[np.ndarray] = None

    @property
    def bound(self):
        return self.chi1_hat + 2 * math.log(self.kappa_hat)


DIST_FLOOR = 1e-10


def _log_ju_backward(model, pts, n, depth):
    """log J^u(f^{-i} q) for i < n at each row of pts."""
    out = np.empty((len(pts), n))
    orbs = np.empty((len(pts), n, 2))
    for a, q in enumerate(pts):
        orb = K.orbit(q[0], q[1], n - 1, model.kr0, model.nsub, -1)
        orbs[a] = orb
        for i, r in enumerate(orb):
            sp = estimate_splitting(model, r, depth)
            _, _, jac = K.step_jac(r[0], r[1], model.kr0, model.nsub, 1)
            out[a, i] = math.log(np.linalg.norm(jac @ sp.e_u))
    return out, orbs


def distortion_check(model, patch: GraphPatch, n, pairs, seed=0, depth=DEFAULT_DEPTH, kappa=None):
    """Backward-iterate distortion sums for random pairs on an unstable patch.

    max_log_ratio = max |sum_{i<n} log J^u(f^-i y) - log J^u(f^-i z)|;
    chi1_hat = max over pairs of sum_i H d(f^-i y, f^-i z) with H the
    sampled Lipschitz envelope of log J^u."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    kap = kappa_hat(model) if kappa is None else kappa
    if pairs <= 0:
        return DistortionReport(n, 0.0, math.nan, 0.0, kap, True, np.zeros(n))
    rng = make_rng(seed)
    l = patch.radius
    u = rng.uniform(-l, l, size=(int(pairs), 2))
    y = patch.torus_points(np.column_stack([u[:, 0], patch(u[:, 0])]))
    z = patch.torus_points(np.column_stack([u[:, 1], patch(u[:, 1])]))
    ly, oy = _log_ju_backward(model, y, n, depth)
    lz, oz = _log_ju_backward(model, z, n, depth)
    diff = ly - lz
    # unstable arclength along the backward orbit: d_k = d_0 / prod_{1<=i<=k} J^u(f^-i y);
    # iterating the points themselves drowns d_k in the stable-direction rounding growth
    d0 = torus_distances(y, z)
    dist = d0[:, None] * np.exp(-np.concatenate([np.zeros((len(y), 1)), np.cumsum(ly[:, 1:], axis=1)], axis=1))
    sums = np.abs(np.cumsum(diff, axis=1))
    by_n = sums.max(axis=0)
    pos = dist > DIST_FLOOR
    H = float(np.max(np.abs(diff[pos]) / dist[pos])) if np.any(pos) else 0.0
    chi1 = float((H * dist).sum(axis=1).max())
    # geometric decay of backward distances
    ks = np.arange(n)
    ld = np.log(np.where(dist > 0, dist, np.nan))
    mean_ld = np.nanmean(ld, axis=0)
    good = np.isfinite(mean_ld)
    if good.sum() >= 2:
        slope = np.polyfit(ks[good], mean_ld[good], 1)[0]
        om = float(math.exp(slope))
    else:
        om = math.nan
    return DistortionReport(n, float(by_n[-1]), om, chi1, kap, False, by_n)


# ------------------------------------------------------------- statistics

class TauStats(NamedTuple):
    mean: float
    median: float
    tail_fit: Optional[float]
    integrable_verdict: bool
    half_mean: float = math.nan
    n: int = 0


def tau_statistics(returns, seed=0, min_samples=1000, tol=0.05) -> TauStats:
    taus = _taus(returns)
    if len(taus) < min_samples:
        raise TooFewSamples(f"{len(taus)} returns < {min_samples}")
    taus = taus.astype(float)
    mean = float(math.fsum(taus) / len(taus))
    med = float(np.median(taus))
    rng = make_rng(seed)
    half = rng.permutation(len(taus))[: len(taus) // 2]
    hm = float(math.fsum(taus[half]) / len(half))
    verdict = abs(hm - mean) < tol * mean
    return TauStats(mean, med, tail_exponent(taus), bool(verdict), hm, len(taus))


def _taus(returns):
    if isinstance(returns, ReturnSample):
        return returns.taus
    if isinstance(returns, np.ndarray):
        return returns.astype(np.int64)
    return np.array([r.tau for r in returns], dtype=np.int64)


def tail_exponent(taus):
    """Slope of the log survival function over the top decade (None if flat)."""
    t = np.sort(np.asarray(taus, dtype=float))
    q = np.quantile(t, 0.9)
    n = len(t)
    surv = 1.0 - np.arange(n) / n
    sel = (t >= q) & (t > t[0])
    ts, ss = t[sel], surv[sel]
    if len(np.unique(ts)) < 3:
        return None
    slope = np.polyfit(np.log(ts), np.log(ss), 1)[0]
    return float(-slope)


def synthetic_heavy_tail(n, seed=0, exponent=1.0):
    """tau = ceil(U^{-1/exponent}): P(tau > t) ~ t^{-exponent}."""
    u = make_rng(seed).random(int(n))
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    return np.ceil(u ** (-1.0 / exponent)).astype(np.int64)


# --------------------------------------------------------------- spreading

def spread_to_srb(model, mu: EmpiricalMeasure, returns, params=None, verdict=None, seed=0):
    """Replace each particle by its tau iterates, then normalize.

    The integrability verdict comes from tau_statistics unless given; with
    fewer than 10^3 returns it cannot be assessed and is taken as given."""
    rs = _as_sample(returns)
    if len(rs) != len(mu):
        raise ValueError("returns must align with the particles of mu")
    if verdict is None and len(rs) >= 1000:
        verdict = tau_statistics(rs, seed=seed).integrable_verdict
    if verdict is False:
        raise NotIntegrable("tau is not integrable by the half-sample test; normalization refused")
    pts, owner = K.spread_points(mu.points[:, 0].copy(), mu.points[:, 1].copy(), rs.taus, model.kr0, model.nsub)
    w = mu.weights[owner]
    raw_total = float(math.fsum(w))
    meta = {"kind": "spread_srb", "generation": mu.meta.get("generation", 0), "seed": mu.meta.get("seed", seed),
            "raw_total": raw_total}
    return EmpiricalMeasure(pts, w / raw_total, meta)


def pushforward(model, m: EmpiricalMeasure):
    return EmpiricalMeasure(apply_many(model, m.points, 1), m.weights, dict(m.meta))


# ---------------------------------------------------------------- Birkhoff

def _bump(cx, cy, sig=0.05):
    def phi(p):
        d = p - np.array([cx, cy])
        d -= np.floor(d + 0.5)
        return np.exp(-(d[:, 0] ** 2 + d[:, 1] ** 2) / (2 * sig * sig))
    phi.__name__ = f"bump({cx},{cy})"
    return phi


def default_observables():
    tp = 2 * np.pi
    obs = [
        lambda p: np.cos(tp * p[:, 0]),
        lambda p: np.cos(tp * p[:, 1]),
        lambda p: np.cos(tp * (p[:, 0] + p[:, 1])),
    ]
    for f, name in zip(obs, ("cos2pi_x", "cos2pi_y", "cos2pi_xy")):
        f.__name__ = name
    obs += [_bump(0.0, 0.0), _bump(0.5, 0.5), _bump(0.25, 0.75)]
    return obs


def birkhoff_averages(model, observables, n_orbits=32, orbit_len=10**6, seed=0, bins=BINS, chunk=250_000):
    """Birkhoff averages along Lebesgue-random orbits and their pooled
    occupation histogram."""
    rng = make_rng(seed)
    starts = rng.random((int(n_orbits), 2))
    sums = np.zeros(len(observables))
    hist = np.zeros((bins, bins))
    tot = 0
    for x, y in starts:
        left = int(orbit_len)
        while left > 0:
            c = min(chunk, left)
            orb = K.orbit(x, y, c, model.kr0, model.nsub, 1)
            seg = orb[:-1]
            for i, phi in enumerate(observables):
                sums[i] += math.fsum(phi(seg))
            h, _, _ = np.histogram2d(seg[:, 0], seg[:, 1], bins=bins, range=[[0, 1], [0, 1]])
            hist += h
            x, y = orb[-1]
            left -= c
            tot += c
    return sums / tot, hist / hist.sum()


def birkhoff_validate(model, srb: EmpiricalMeasure, observables=None, n_orbits=32, orbit_len=10**6, seed=0):
    """max over observables of |int phi d(srb) - Birkhoff average|."""
    obs = default_observables() if observables is None else list(observables)
    avg, _ = birkhoff_averages(model, obs, n_orbits, orbit_len, seed)
    srb = srb.normalized()
    return float(max(abs(srb.integrate(phi) - a) for phi, a in zip(obs, avg)))
