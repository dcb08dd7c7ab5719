"""Region tags, lengths of stay, lambda-hyperbolicity, bounded type and
Pliss hyperbolic times."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .dynamics import MapModel, TorusPoint, _pt, distance_to_S, tangent
from .errors import EmptySequence, NotInOmega0
from .splitting import DEFAULT_DEPTH, SEED_VECTOR, backward_trace, estimate_splitting, trace_orbit


@dataclass(frozen=True)
class RegionParams:
    eps1: float = 0.05
    eps2: float = 0.2
    lam: float = 0.3
    r0_time: float = math.exp(-0.2 * 0.3 / 3)
    K: float = 64.0
    C_graph: float = 5e-10
    rho1: float = 0.02
    eps_hat: float = 0.2 * 0.3 / 20
    nine_halves: float = 4.5   # numerator of the radius exponent (9/2)

    def __post_init__(self):
        for k in ("eps1", "eps2", "lam", "r0_time", "K", "C_graph", "rho1", "eps_hat"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if not self.eps2 < 1:
            raise ValueError("eps2 must be < 1")
        if not self.r0_time < 1:
            raise ValueError("r0_time must be < 1")

    @property
    def thr(self):
        return self.eps2 * self.lam

    @property
    def radius_rate(self):
        return self.nine_halves * self.lam / self.K

    def with_zeta(self, zeta_hat):
        """r0 = e^{-zeta/3} and eps_hat = zeta/20 from a measured zeta."""
        return replace(self, r0_time=math.exp(-zeta_hat / 3.0), eps_hat=zeta_hat / 20.0)


class Region(enum.IntFlag):
    Omega1 = 1
    Omega2 = 2
    BSeps1 = 4
    Omega3 = 8


class Capped(int):
    """Length of stay that hit the cap (true value >= this)."""
    capped = True

    def __repr__(self):
        return f"Capped({int(self)})"


class LambdaVerdict(NamedTuple):
    verdict: bool
    liminf_u: float
    liminf_s: float


class BoundedType(NamedTuple):
    verdict: bool
    s_k: np.ndarray
    t_k: np.ndarray
    ratio_sup: float


class ZetaBound(NamedTuple):
    zeta_hat: float
    delta_eps2_hat: float


@dataclass
class HyperbolicityReport:
    base: TorusPoint
    horizon: int
    region_tags: np.ndarray
    n_plus: Optional[int]
    n_minus: Optional[int]
    liminf_u: float
    liminf_s: float
    pliss_times: list
    theta_hat: float
    s_k: np.ndarray
    t_k: np.ndarray
    ratio_sup: float
    verdict_lambda: bool = False
    verdict_bounded: bool = False


# ------------------------------------------------------------------ regions

def in_B(model, p, params):
    return distance_to_S(model, p) < params.eps1


def omega3_quantities(model, p, depth=DEFAULT_DEPTH):
    """The four log-norms at p: log|df|Eu|, -log|df^-1|Eu|, -log|df|Es|, log|df^-1|Es|."""
    sp = estimate_splitting(model, p, depth)
    J = tangent(model, p).as_array()
    Ji = tangent(model, p, inverse=True).as_array()
    return np.array([
        np.log(np.linalg.norm(J @ sp.e_u)),
        -np.log(np.linalg.norm(Ji @ sp.e_u)),
        -np.log(np.linalg.norm(J @ sp.e_s)),
        np.log(np.linalg.norm(Ji @ sp.e_s)),
    ])


def classify(model: MapModel, p, params: RegionParams, depth=DEFAULT_DEPTH) -> Region:
    p = _pt(p)
    if in_B(model, p, params):
        return Region.BSeps1
    fp = K.step(p.x, p.y, model.kr0, model.nsub, 1)
    bp = K.step(p.x, p.y, model.kr0, model.nsub, -1)
    if in_B(model, fp, params) or in_B(model, bp, params):
        tag = Region.Omega2
    else:
        tag = Region.Omega1
    if omega3_quantities(model, p, depth).min() >= params.thr:
        tag |= Region.Omega3
    return tag


def orbit_tags(model, tr, params):
    """Region flags along a forward trace (points 0..n-1)."""
    n = len(tr.logs_u)
    pts = tr.points
    if model.has_S:
        d = np.hypot(*(pts - np.floor(pts + 0.5)).T)
        inb = d < params.eps1
    else:
        inb = np.zeros(len(pts), dtype=bool)
    tags = np.zeros(n, dtype=np.int64)
    prev_b = np.empty(n, dtype=bool)
    prev_b[1:] = inb[:n - 1]
    if model.has_S:
        q = K.step(pts[0, 0], pts[0, 1], model.kr0, model.nsub, -1)
        prev_b[0] = K.torus_dist0(*q) < params.eps1
    else:
        prev_b[0] = False
    cur = inb[:n]
    nxt = inb[1:n + 1]
    tags[cur] = Region.BSeps1
    om1 = ~cur & ~nxt & ~prev_b
    tags[om1] = Region.Omega1
    tags[~cur & ~om1] = Region.Omega2
    q1 = -tr.logs_u
    q2 = np.concatenate([[tr.log_ju_prev], -tr.logs_u[:-1]])
    q3 = -tr.logs_s
    # log|df^-1|E^s(x_k)| = -log|df|E^s(x_{k-1})|
    q4 = np.empty(n)
    q4[1:] = -tr.logs_s[:-1]
    Ji = tangent(model, pts[0], inverse=True).as_array()
    q4[0] = np.log(np.linalg.norm(Ji @ tr.e_s[0]))
    good = (np.minimum(np.minimum(q1, q2), np.minimum(q3, q4)) >= params.thr) & ~cur
    tags[good] |= Region.Omega3
    return tags


def stay_lengths(model, p, params, cap=10**6):
    """(n_plus, n_minus); None when the neighbour is outside B(S, eps1)."""
    p = _pt(p)
    if in_B(model, p, params):
        raise NotInOmega0(f"d(p, S) = {distance_to_S(model, p):.3g} < eps1")
    out = []
    for d in (1, -1):
        q = K.step(p.x, p.y, model.kr0, model.nsub, d)
        if not in_B(model, q, params):
            out.append(None)
            continue
        k = K.first_exit(p.x, p.y, params.eps1, int(cap), model.kr0, model.nsub, d)
        out.append(Capped(cap) if k < 0 else int(k))
    return tuple(out)


# ------------------------------------------------------- lambda-hyperbolic

def _min_average(logs, window):
    n = np.arange(1, len(logs) + 1)
    avg = np.cumsum(logs) / n
    return float(avg[window - 1:].min())


def backward_unstable_logs(model, p, n, extra=DEFAULT_DEPTH):
    """b[k-1] = log|df^-1|E^u(f^{-k+1}p)|, k = 1..n, so that partial sums
    give log|df^{-k}(p)|E^u(p)|."""
    _, _, _, jfu = backward_trace(model, p, n, extra)
    return -np.log(jfu[1:n + 1])


def lambda_hyperbolic(model, p, params, horizon=10**5, window=32, depth=DEFAULT_DEPTH):
    if not (horizon >= window >= 10):
        raise ValueError("need horizon >= window >= 10")
    bu = backward_unstable_logs(model, p, horizon, depth)
    tr = trace_orbit(model, p, horizon, depth)
    lu = _min_average(bu, window)
    ls = _min_average(tr.logs_s, window)
    return LambdaVerdict(bool(lu <= -params.lam and ls <= -params.lam), lu, ls)


def qualifying_times(logs, lam):
    n = np.arange(1, len(logs) + 1)
    return n[np.cumsum(logs) / n <= -lam]


def _ratio_sup(seq, window):
    seq = np.asarray(seq)
    tail = seq[seq >= window] if window else seq
    if len(tail) < 2:
        tail = seq
    if len(tail) < 2:
        return 1.0
    return float((tail[1:] / tail[:-1]).max())


def bounded_type_from_logs(logs_u, logs_s, lam, L, window=0):
    s_k = qualifying_times(logs_u, lam)
    t_k = qualifying_times(logs_s, lam)
    if len(s_k) == 0 or len(t_k) == 0:
        raise EmptySequence("no qualifying times below the horizon")
    rs = max(_ratio_sup(s_k, window), _ratio_sup(t_k, window))
    return BoundedType(bool(rs <= L), s_k, t_k, rs)


def bounded_type(model, p, params, horizon=10**5, L=4.0, window=32, depth=DEFAULT_DEPTH):
    """Ratios s_{k+1}/s_k are taken over the tail s_k >= window (the
    definition is a limsup)."""
    bu = backward_unstable_logs(model, p, horizon, depth)
    tr = trace_orbit(model, p, horizon, depth)
    return bounded_type_from_logs(bu, tr.logs_s, params.lam, L, window)


# ------------------------------------------------------------------- Pliss

def _exact_ints(values):
    """Scale a float array to exact integers over a common power of two."""
    ratios = [float(v).as_integer_ratio() for v in values]
    den = max(d for _, d in ratios)
    return [n * (den // d) for n, d in ratios], den


def pliss_times(logs, r) -> list:
    """n (1-based) with sum_{i=n-k+1}^{n} logs[i] <= k log r for all k <= n.

    logs[j-1] is the log-norm at f^j(x). Uses T_j = S_j - j log r: n
    qualifies iff T_n <= min_{j<n} T_j. Near-ties are settled exactly."""
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    logs = np.asarray(logs, dtype=float)
    if len(logs) == 0:
        return []
    lr = math.log(r)
    T = np.concatenate([[0.0], np.cumsum(logs - lr)])
    prev_min = np.minimum.accumulate(T)[:-1]
    gap = T[1:] - prev_min
    # float error bound of the running sums
    scale = 8 * np.finfo(float).eps * len(logs) * float(np.abs(logs - lr).sum() + abs(lr))
    hit = gap <= 0
    if np.any(np.abs(gap) <= scale):
        hit = _pliss_exact(logs, lr)
    return [int(n) for n in np.nonzero(hit)[0] + 1]


def _pliss_exact(logs, lr):
    vals, _ = _exact_ints(list(logs) + [lr])
    L = vals[-1]
    t = 0
    tmin = 0
    out = np.zeros(len(logs), dtype=bool)
    for j, v in enumerate(vals[:-1]):
        t += v - L
        out[j] = t <= tmin
        if t < tmin:
            tmin = t
    return out


def theta_density(pliss, n) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    p = np.asarray(pliss, dtype=np.int64)
    return float(np.count_nonzero(p <= n)) / n


def sqrt_r0_robustness(model, p, n_time, tube_radius=1e-4, samples=100, r0_time=None,
                       params=None, seed=0, depth=DEFAULT_DEPTH):
    """Fraction of tube-perturbed points for which n_time is a sqrt(r0) time."""
    p = _pt(p)
    if r0_time is None:
        r0_time = (params or RegionParams()).r0_time
    rng = np.random.Generator(np.random.Philox(seed))
    sp = estimate_splitting(model, p, depth)
    # width along e_u so that the orbit segment stays in the tube
    tr = trace_orbit(model, p, n_time, depth, split=sp)
    grow = math.exp(-float(np.sum(tr.logs_u)))
    scale = 0.5 * tube_radius / grow
    ok = 0
    got = 0
    tries = 0
    while got < samples:
        tries += 1
        if tries > 50 * samples:
            raise EmptySequence("could not sample the tube")
        d = rng.uniform(-1, 1) * scale * sp.e_u + rng.uniform(-0.5, 0.5) * tube_radius * sp.e_s
        if _tube_excursion(model, p, d, n_time) >= tube_radius:
            scale *= 0.5
            continue
        q = TorusPoint.make(p.x + d[0], p.y + d[1])
        lq = trace_orbit(model, q, n_time, depth).logs_u
        got += 1
        ok += n_time in set(pliss_times(lq, math.sqrt(r0_time)))
    return ok / samples


def _tube_excursion(model, p, d, n):
    """Max displacement of p + d from the orbit of p over n steps."""
    dx = np.array([d[0]])
    dy = np.array([d[1]])
    worst = float(np.hypot(d[0], d[1]))
    x, y = p.x, p.y
    for _ in range(n):
        x, y, dx, dy = K.propagate_offsets(x, y, dx, dy, 1, model.kr0, model.nsub, 1)
        worst = max(worst, float(np.hypot(dx[0], dy[0])))
    return worst


# -------------------------------------------------------------------- zeta

def omega3_frequency(model, p, params, horizon, window=32, depth=DEFAULT_DEPTH):
    tr = trace_orbit(model, p, horizon, depth)
    tags = orbit_tags(model, tr, params)
    om3 = (tags & Region.Omega3) != 0
    freq = np.cumsum(om3) / np.arange(1, horizon + 1)
    return float(freq[window - 1:].min())


def zeta_bound(model, samples, params, horizon=10**5, window=32, depth=DEFAULT_DEPTH):
    """(zeta_hat, delta_hat) over the lambda-hyperbolic members of samples."""
    best = math.inf
    for q in samples:
        q = _pt(q)
        if model.has_S and distance_to_S(model, q) < 1e-12:
            continue
        try:
            if not lambda_hyperbolic(model, q, params, horizon, window, depth).verdict:
                continue
        except Exception:
            continue
        best = min(best, omega3_frequency(model, q, params, horizon, window, depth))
    if not math.isfinite(best):
        raise EmptySequence("no lambda-hyperbolic sample")
    return ZetaBound(best * params.thr, best)


# ---------------------------------------------------------------- analysis

def analyze_orbit(model, p, params, horizon=10**4, window=32, L=4.0, depth=DEFAULT_DEPTH):
    p = _pt(p)
    tr = trace_orbit(model, p, horizon, depth)
    bu = backward_unstable_logs(model, p, horizon, depth)
    tags = orbit_tags(model, tr, params)
    lu = _min_average(bu, window)
    ls = _min_average(tr.logs_s, window)
    lam_ok = lu <= -params.lam and ls <= -params.lam
    try:
        bt = bounded_type_from_logs(bu, tr.logs_s, params.lam, L, window)
    except EmptySequence:
        bt = BoundedType(False, np.array([], dtype=np.int64), np.array([], dtype=np.int64), math.inf)
    n_plus = n_minus = None
    if not in_B(model, p, params):
        n_plus, n_minus = stay_lengths(model, p, params, cap=horizon)
    pl = pliss_times(tr.logs_u, params.r0_time)
    return HyperbolicityReport(
        base=p, horizon=horizon, region_tags=tags, n_plus=n_plus, n_minus=n_minus,
        liminf_u=lu, liminf_s=ls, pliss_times=pl, theta_hat=theta_density(pl, horizon),
        s_k=bt.s_k, t_k=bt.t_k, ratio_sup=bt.ratio_sup,
        verdict_lambda=bool(lam_ok), verdict_bounded=bool(lam_ok and bt.verdict))
