"""Desk-scale acceptance criteria 1-9 with their oracles."""
from __future__ import annotations

import math
import time
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .dynamics import E_S, E_U, LAMBDA1, LOG_LAMBDA1, distance_to_S, linear_cat, neutral_cat
from .errors import NotIntegrable, SRBLabError
from .graph_transform import (contraction_certificate, grow_unstable_manifold, make_chart, linear_graph,
                              verify_tangency)
from .hyperbolicity import (RegionParams, bounded_type, lambda_hyperbolic, pliss_times, sqrt_r0_robustness,
                            theta_density)
from .inducing import (EmpiricalMeasure, ReturnSample, birkhoff_averages, default_observables,
                       distortion_check, histogram, l1, make_rng, push_measure, pushforward, spread_to_srb,
                       synthetic_heavy_tail, tau_statistics)
from .splitting import estimate_splitting, trace_orbit


class CriterionResult(NamedTuple):
    number: int
    name: str
    passed: bool
    value: str
    seconds: float
    limit_seconds: float = math.inf
    skipped: bool = False

    @property
    def status(self):
        return "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")

    def line(self):
        return f"criterion {self.number} {self.status} {self.name}: {self.value} ({self.seconds:.1f}s)"


FULL = {
    "c1_particles": 10**5, "c1_generations": 50,
    "c2_sequences": 500, "c2_max_len": 200,
    "c3_points": 100, "c3_short": 10**4, "c3_long": 10**5,
    "c4_points": 100, "c4_depth": 10**4, "c4_horizon": 10**4,
    "c6_patches": 4, "c6_pairs": 64,
    "c7_particles": 5000, "c7_generations": 30,
    "c8_particles": 10**5, "c8_generations": 50, "c8_orbits": 32, "c8_orbit_len": 10**6,
    "c9_points": 100, "c9_samples": 10,
}

_state = {}


def _timed(number, name, limit, fn):
    t = time.perf_counter()
    ok, value = fn()
    dt = time.perf_counter() - t
    return CriterionResult(number, name, bool(ok and dt < limit), value, dt, limit)


# ------------------------------------------------------------ oracles

def brute_pliss(logs, r):
    """O(n^2) definition check in exact rational arithmetic."""
    vals = [Fraction(float(v)) for v in logs]
    lr = Fraction(math.log(r))
    den = math.lcm(*(v.denominator for v in vals), lr.denominator)
    iv = [int(v * den) for v in vals]
    il = int(lr * den)
    out = []
    for n in range(1, len(iv) + 1):
        acc = 0
        ok = True
        for k in range(1, n + 1):
            acc += iv[n - k]
            if acc > k * il:
                ok = False
                break
        if ok:
            out.append(n)
    return out


def random_log_sequences(count, max_len, seed=0):
    """Mix of generic sequences and ones built from exact ties with log r."""
    rng = make_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(1, max_len + 1))
        r = float(rng.uniform(0.3, 0.99))
        lr = math.log(r)
        kind = i % 3
        if kind == 0:
            logs = rng.normal(lr, 0.5, n)
        elif kind == 1:
            pool = np.array([lr, lr, 0.0, 2 * lr, -lr, lr - 0.25, lr + 0.25])
            logs = pool[rng.integers(0, len(pool), n)]
        else:
            logs = np.round(rng.normal(-0.1, 0.3, n), 1)
        out.append((logs, r))
    return out


def sample_points(model, count, params, seed, horizon=10**4, bounded=False, max_tries=None):
    """Lebesgue-random points in Omega0 (lambda-hyperbolic, outside B)."""
    rng = make_rng(seed)
    pts = []
    tries = 0
    max_tries = max_tries or 50 * count
    while len(pts) < count and tries < max_tries:
        tries += 1
        p = tuple(rng.random(2))
        if distance_to_S(model, p) < params.eps1:
            continue
        try:
            if not lambda_hyperbolic(model, p, params, horizon).verdict:
                continue
            if bounded and not bounded_type(model, p, params, horizon).verdict:
                continue
        except SRBLabError:
            continue
        pts.append(p)
    return pts


# ------------------------------------------------------------ criteria

def criterion_1(b=FULL, seed=0):
    def run():
        lin = linear_cat()
        P = RegionParams()
        rng = make_rng(seed)
        p = tuple(rng.random(2))
        tr = trace_orbit(lin, p, 60)
        lyap = abs(float(np.mean(-tr.logs_u)) - LOG_LAMBDA1)
        split_err = 0.0
        for q in rng.random((16, 2)):
            sp = estimate_splitting(lin, q)
            split_err = max(split_err, np.abs(sp.e_u - E_U).max(), np.abs(sp.e_s - E_S).max())
        ch = make_chart(lin, p)
        cert = contraction_certificate(lin, p, linear_graph(ch, 0.1), linear_graph(ch, -0.05), 5, P)
        sup_err = float(np.abs(cert.sup_ratios - 1 / LAMBDA1).max())
        lip_err = float(np.abs(cert.lip_ratios - LAMBDA1 ** -2).max())
        g, _ = grow_unstable_manifold(lin, p, 50, P)
        off = g.offsets()
        dev = float(np.abs(off[:, 0] * E_U[1] - off[:, 1] * E_U[0]).max())
        mu, rs = push_measure(lin, g, b["c1_particles"], b["c1_generations"], P, seed=seed)
        tau_one = bool(np.all(rs.taus == 1))
        d = l1(mu.histogram(), np.full((32, 32), 1 / 1024))
        ok = (lyap < 1e-8 and split_err < 1e-10 and sup_err < 1e-6 and lip_err < 1e-6 and dev < 1e-10
              and tau_one and d < 0.02)
        return ok, (f"lyap_err={lyap:.2e} split_err={split_err:.2e} sup_err={sup_err:.2e} "
                    f"lip_err={lip_err:.2e} eigenline_dev={dev:.2e} tau_one={tau_one} L1={d:.4f}")
    return _timed(1, "cat-map control", 60, run)


def criterion_2(b=FULL, seed=0):
    def run():
        seqs = random_log_sequences(b["c2_sequences"], b["c2_max_len"], seed)
        bad = sum(pliss_times(logs, r) != brute_pliss(logs, r) for logs, r in seqs)
        return bad == 0, f"mismatches={bad}/{len(seqs)}"
    return _timed(2, "Pliss oracle equivalence", 10, run)


def criterion_3(b=FULL, seed=0):
    def run():
        m = neutral_cat()
        P = RegionParams()
        pts = sample_points(m, b["c3_points"], P, seed + 3, b["c3_short"])
        pos = close = 0
        for p in pts:
            tr = trace_orbit(m, p, b["c3_long"])
            pl = pliss_times(tr.logs_u, P.r0_time)
            t_s = theta_density(pl, b["c3_short"])
            t_l = theta_density(pl, b["c3_long"])
            pos += t_l > 0
            close += t_s > 0 and abs(t_l - t_s) <= 0.2 * t_s
        n = max(len(pts), 1)
        ok = len(pts) == b["c3_points"] and pos / n >= 0.95 and close / n >= 0.95
        return ok, f"points={len(pts)} theta>0={pos / n:.3f} within20%={close / n:.3f}"
    return _timed(3, "hyperbolic-time density", 180, run)


def criterion_4(b=FULL, seed=0):
    def run():
        m = neutral_cat()
        P = RegionParams()
        pts = sample_points(m, b["c4_points"], P, seed + 4, b["c4_horizon"], bounded=True)
        good = []
        for p in pts:
            try:
                g1, l1_ = grow_unstable_manifold(m, p, b["c4_depth"], P)
                g0, l0_ = grow_unstable_manifold(m, p, b["c4_depth"] // 2, P)
            except SRBLabError:
                continue
            same = max(l1_.i_of_n, default=0) == max(l0_.i_of_n, default=0)
            if same and abs(g1.radius - g0.radius) < 1e-9 and l1_.interlaced():
                good.append((p, g1))
        _state["c4_patches"] = good
        n = max(len(pts), 1)
        ok = len(pts) == b["c4_points"] and len(good) / n >= 0.95
        return ok, f"points={len(pts)} converged={len(good) / n:.3f}"
    return _timed(4, "truncation boundedness", 300, run)


def criterion_5(b=FULL, seed=0):
    def run():
        if "c4_patches" not in _state:
            criterion_4(b, seed)
        patches = _state["c4_patches"]
        m = neutral_cat()
        worst = max((verify_tangency(m, g, 64) for _, g in patches), default=math.nan)
        return bool(patches) and worst < 1e-4, f"patches={len(patches)} max_angle={worst:.2e}"
    return _timed(5, "tangency", math.inf, run)


def distortion_points(model, count, params, seed, n=30, window=(3, 14)):
    """Points whose backward orbit visits the nonlinear disk d < r0 exactly
    once in n steps, at a step inside window, and whose whole passage through
    the modification disk d < lambda1 r0 also stays inside window."""
    rng = make_rng(seed)
    R = model.r0
    out = []
    while len(out) < count:
        p = tuple(rng.random(2))
        if distance_to_S(model, p) < params.eps1:
            continue
        orb = K.orbit(p[0], p[1], n, model.kr0, model.nsub, -1)
        d = np.hypot(*(orb - np.floor(orb + 0.5)).T)
        hits = np.nonzero(d < R)[0]
        near = np.nonzero(d < LAMBDA1 * R)[0]
        if len(hits) == 1 and window[0] <= near.min() and near.max() <= window[1]:
            out.append(p)
    return out


def criterion_6(b=FULL, seed=0):
    def run():
        m = neutral_cat()
        P = RegionParams()
        ok = True
        worst_rel = 0.0
        worst_gap = math.inf
        for p in distortion_points(m, b["c6_patches"], P, seed + 6):
            g, _ = grow_unstable_manifold(m, p, 1000, P)
            r15 = distortion_check(m, g, 15, b["c6_pairs"], seed=seed)
            r30 = distortion_check(m, g, 30, b["c6_pairs"], seed=seed)
            rel = abs(r30.max_log_ratio - r15.max_log_ratio) / max(r15.max_log_ratio, 1e-300)
            worst_rel = max(worst_rel, rel)
            for r in (r15, r30):
                worst_gap = min(worst_gap, r.bound - r.max_log_ratio)
            ok &= r15.max_log_ratio > 0 and rel <= 0.1 and worst_gap >= 0
        return ok, f"saturation_rel={worst_rel:.3e} bound_margin={worst_gap:.3e}"
    return _timed(6, "distortion", math.inf, run)


def criterion_7(b=FULL, seed=0):
    def run():
        m = neutral_cat()
        P = RegionParams()
        g, _ = grow_unstable_manifold(m, (0.3, 0.2), 1000, P)
        _, rs = push_measure(m, g, b["c7_particles"], b["c7_generations"], P, seed=seed)
        st = tau_statistics(rs, seed=seed)
        taus = synthetic_heavy_tail(len(rs), seed=seed)
        fake = ReturnSample(rs.starts, taus, rs.ends)
        mu = EmpiricalMeasure(rs.starts, np.full(len(rs), 1.0 / len(rs)), {"kind": "induced_mu"})
        try:
            spread_to_srb(m, mu, fake, P, seed=seed)
            rejected = False
        except NotIntegrable:
            rejected = True
        ok = len(rs) >= 10**5 and st.integrable_verdict and rejected
        return ok, (f"returns={len(rs)} mean={st.mean:.4f} half_mean={st.half_mean:.4f} "
                    f"synthetic_rejected={rejected}")
    return _timed(7, "tau integrability", math.inf, run)


def criterion_8(b=FULL, seed=0):
    def run():
        m = neutral_cat()
        P = RegionParams()
        g, _ = grow_unstable_manifold(m, (0.3, 0.2), 1000, P)
        mu, rs = push_measure(m, g, b["c8_particles"], b["c8_generations"], P, seed=seed)
        srb = spread_to_srb(m, mu, rs, P, seed=seed)
        hs = srb.histogram()
        inv = l1(hs, pushforward(m, srb).histogram())
        _, hb = birkhoff_averages(m, default_observables()[:1], b["c8_orbits"], b["c8_orbit_len"], seed + 8)
        d = l1(hs, hb)
        return d < 0.05 and inv < 0.02, f"L1_birkhoff={d:.4f} L1_invariance={inv:.4f} leakage={mu.meta['leakage']}"
    return _timed(8, "SRB consistency", 600, run)


def criterion_9(b=FULL, seed=0):
    def run():
        m = neutral_cat()
        P = RegionParams()
        rng = make_rng(seed + 9)
        passed = total = 0
        while total < b["c9_points"]:
            p = tuple(rng.random(2))
            if distance_to_S(m, p) < P.eps1:
                continue
            try:
                tr = trace_orbit(m, p, 200)
            except SRBLabError:
                continue
            pl = [t for t in pliss_times(tr.logs_u, P.r0_time) if t >= 20]
            if not pl:
                continue
            total += 1
            frac = sqrt_r0_robustness(m, p, pl[0], 1e-4, b["c9_samples"], P.r0_time, P,
                                      seed=int(rng.integers(2**31)))
            passed += frac == 1.0
        return passed == total, f"passed={passed}/{total}"
    return _timed(9, "sqrt(r0) robustness", math.inf, run)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9)
NEUTRAL_ONLY = {3, 4, 5, 6, 7, 8, 9}
NAMES = {1: "cat-map control", 2: "Pliss oracle equivalence", 3: "hyperbolic-time density",
         4: "truncation boundedness", 5: "tangency", 6: "distortion", 7: "tau integrability",
         8: "SRB consistency", 9: "sqrt(r0) robustness"}


def run_all(model_kind="neutral_cat", budgets=FULL, seed=0, only=None, echo=None):
    _state.clear()
    out = []
    for i, fn in enumerate(CRITERIA, 1):
        if only and i not in only:
            continue
        if i in NEUTRAL_ONLY and model_kind != "neutral_cat":
            r = CriterionResult(i, NAMES[i], True, "defined on neutral_cat", 0.0, skipped=True)
        else:
            r = fn(budgets, seed)
        if echo:
            echo(r.line())
        out.append(r)
    return out
