"""Compiled inner loops for the two torus maps.

Everything here works on plain floats / arrays so that numba can compile it.
The neutral map is written in "clock" form: inside the slow-down region the
flow u' = l*u*psi, s' = -l*s*psi is a time change of the linear hyperbolic
flow, so f(u, s) = (u e^{l tau}, s e^{-l tau}) with tau solving
tau' = psi(rho(tau)), rho(tau) = u^2 e^{2 l tau} + s^2 e^{-2 l tau}.
"""
import math

import numpy as np
from numba import njit

SQRT5 = math.sqrt(5.0)
LAMBDA1 = (3.0 + SQRT5) / 2.0
LOG_LAMBDA1 = math.log(LAMBDA1)

_nu = math.sqrt(1.0 + ((SQRT5 - 1.0) / 2.0) ** 2)
_ns = math.sqrt(1.0 + ((SQRT5 + 1.0) / 2.0) ** 2)
EU0 = 1.0 / _nu
EU1 = ((SQRT5 - 1.0) / 2.0) / _nu
ES0 = 1.0 / _ns
ES1 = -((SQRT5 + 1.0) / 2.0) / _ns

HCELL = 32


@njit(cache=True)
def wrap01(v):
    r = v - math.floor(v)
    if r >= 1.0:
        r = 0.0
    return r


@njit(cache=True)
def lift(v):
    # representative in [-0.5, 0.5)
    return v - math.floor(v + 0.5)


@njit(cache=True)
def psi(rho, r0sq):
    a = 0.9 * r0sq
    if rho <= a:
        return rho / r0sq
    if rho >= r0sq:
        return 1.0
    t = (rho - a) / (0.1 * r0sq)
    return 0.9 + 0.1 * t * (1.0 + t - t * t)


@njit(cache=True)
def dpsi(rho, r0sq):
    a = 0.9 * r0sq
    if rho <= a:
        return 1.0 / r0sq
    if rho >= r0sq:
        return 0.0
    t = (rho - a) / (0.1 * r0sq)
    return (1.0 + 2.0 * t - 3.0 * t * t) / r0sq


@njit(cache=True)
def _psi_piece(r1, dr, r0sq):
    # psi(r1 + dr) - psi(r1) for r1, r1 + dr in the same piece
    a = 0.9 * r0sq
    mid = r1 + 0.5 * dr
    if mid <= a:
        return dr / r0sq
    if mid >= r0sq:
        return 0.0
    hh = 0.1 * r0sq
    t1 = (r1 - a) / hh
    dt = dr / hh
    t2 = t1 + dt
    return 0.1 * dt * (1.0 + t1 + t2 - (t1 * t1 + t1 * t2 + t2 * t2))


@njit(cache=True)
def psi_diff(rho, drho, r0sq):
    """psi(rho + drho) - psi(rho) without cancellation."""
    if drho == 0.0:
        return 0.0
    a = 0.9 * r0sq
    tgt = rho + drho
    cur = rho
    acc = 0.0
    if drho > 0:
        for bp in (a, r0sq):
            if cur < bp < tgt:
                acc += _psi_piece(cur, bp - cur, r0sq)
                cur = bp
        acc += _psi_piece(cur, tgt - cur if cur != rho else drho, r0sq)
    else:
        for bp in (r0sq, a):
            if tgt < bp < cur:
                acc += _psi_piece(cur, bp - cur, r0sq)
                cur = bp
        acc += _psi_piece(cur, tgt - cur if cur != rho else drho, r0sq)
    return acc


@njit(cache=True)
def path_min_rho(u, s, ell, tlo, thi):
    uu = u * u
    ss = s * s
    rlo = uu * math.exp(2 * ell * tlo) + ss * math.exp(-2 * ell * tlo)
    rhi = uu * math.exp(2 * ell * thi) + ss * math.exp(-2 * ell * thi)
    m = min(rlo, rhi)
    if uu > 0.0 and ss > 0.0:
        ts = math.log(ss / uu) / (4.0 * ell)
        if tlo < ts < thi:
            m = min(m, 2.0 * math.sqrt(uu * ss))
    return m


@njit(cache=True)
def _is_linear(u, s, r0, direction):
    if r0 <= 0.0:
        return True
    if direction > 0:
        return path_min_rho(u, s, LOG_LAMBDA1, 0.0, 1.0) >= r0 * r0
    return path_min_rho(u, s, LOG_LAMBDA1, -1.0, 0.0) >= r0 * r0


@njit(cache=True)
def _clock_rhs(tau, a, b, u0, s0, ell, r0sq):
    e2 = math.exp(2 * ell * tau)
    uu = u0 * u0 * e2
    ss = s0 * s0 / e2
    rho = uu + ss
    p = psi(rho, r0sq)
    dp = dpsi(rho, r0sq)
    rt = 2 * ell * (uu - ss)
    da = dp * (2 * u0 * e2 + rt * a)
    db = dp * (2 * s0 / e2 + rt * b)
    return p, da, db


@njit(cache=True)
def clock(u0, s0, r0, nsub, direction):
    """RK4 for the clock and its sensitivities a = dtau/du0, b = dtau/ds0."""
    ell = LOG_LAMBDA1
    r0sq = r0 * r0
    h = direction / nsub
    tau = 0.0
    a = 0.0
    b = 0.0
    for _ in range(nsub):
        k1t, k1a, k1b = _clock_rhs(tau, a, b, u0, s0, ell, r0sq)
        k2t, k2a, k2b = _clock_rhs(tau + 0.5 * h * k1t, a + 0.5 * h * k1a, b + 0.5 * h * k1b, u0, s0, ell, r0sq)
        k3t, k3a, k3b = _clock_rhs(tau + 0.5 * h * k2t, a + 0.5 * h * k2a, b + 0.5 * h * k2b, u0, s0, ell, r0sq)
        k4t, k4a, k4b = _clock_rhs(tau + h * k3t, a + h * k3a, b + h * k3b, u0, s0, ell, r0sq)
        tau += h * (k1t + 2 * k2t + 2 * k3t + k4t) / 6.0
        a += h * (k1a + 2 * k2a + 2 * k3a + k4a) / 6.0
        b += h * (k1b + 2 * k2b + 2 * k3b + k4b) / 6.0
    return tau, a, b


@njit(cache=True)
def step(x, y, r0, nsub, direction):
    """One application of f (direction=1) or f^{-1} (direction=-1)."""
    wx = lift(x)
    wy = lift(y)
    u = EU0 * wx + EU1 * wy
    s = ES0 * wx + ES1 * wy
    if _is_linear(u, s, r0, direction):
        if direction > 0:
            return wrap01(2 * x + y), wrap01(x + y)
        return wrap01(x - y), wrap01(2 * y - x)
    tau, _, _ = clock(u, s, r0, nsub, direction)
    e = math.exp(LOG_LAMBDA1 * tau)
    u1 = u * e
    s1 = s / e
    return wrap01(EU0 * u1 + ES0 * s1), wrap01(EU1 * u1 + ES1 * s1)


@njit(cache=True)
def step_jac(x, y, r0, nsub, direction):
    """Image point and the 2x2 derivative of f^{direction} at (x, y)."""
    jac = np.empty((2, 2))
    wx = lift(x)
    wy = lift(y)
    u = EU0 * wx + EU1 * wy
    s = ES0 * wx + ES1 * wy
    if _is_linear(u, s, r0, direction):
        if direction > 0:
            jac[0, 0] = 2.0
            jac[0, 1] = 1.0
            jac[1, 0] = 1.0
            jac[1, 1] = 1.0
            return wrap01(2 * x + y), wrap01(x + y), jac
        jac[0, 0] = 1.0
        jac[0, 1] = -1.0
        jac[1, 0] = -1.0
        jac[1, 1] = 2.0
        return wrap01(x - y), wrap01(2 * y - x), jac
    ell = LOG_LAMBDA1
    tau, a, b = clock(u, s, r0, nsub, direction)
    e = math.exp(ell * tau)
    u1 = u * e
    s1 = s / e
    j00 = e + u * ell * e * a
    j01 = u * ell * e * b
    j10 = -s * ell * a / e
    j11 = 1.0 / e - s * ell * b / e
    # back to torus coordinates: J = P Jeig P^T, P = [e_u e_s]
    p00, p01, p10, p11 = EU0, ES0, EU1, ES1
    m00 = p00 * j00 + p01 * j10
    m01 = p00 * j01 + p01 * j11
    m10 = p10 * j00 + p11 * j10
    m11 = p10 * j01 + p11 * j11
    jac[0, 0] = m00 * p00 + m01 * p01
    jac[0, 1] = m00 * p10 + m01 * p11
    jac[1, 0] = m10 * p00 + m11 * p01
    jac[1, 1] = m10 * p10 + m11 * p11
    return wrap01(EU0 * u1 + ES0 * s1), wrap01(EU1 * u1 + ES1 * s1), jac


@njit(cache=True)
def orbit(x, y, n, r0, nsub, direction):
    out = np.empty((n + 1, 2))
    out[0, 0] = x
    out[0, 1] = y
    for k in range(n):
        x, y = step(x, y, r0, nsub, direction)
        out[k + 1, 0] = x
        out[k + 1, 1] = y
    return out


@njit(cache=True)
def orbit_jac(x, y, n, r0, nsub, direction):
    pts = np.empty((n + 1, 2))
    jacs = np.empty((n, 2, 2))
    pts[0, 0] = x
    pts[0, 1] = y
    for k in range(n):
        x, y, jac = step_jac(x, y, r0, nsub, direction)
        jacs[k] = jac
        pts[k + 1, 0] = x
        pts[k + 1, 1] = y
    return pts, jacs


@njit(cache=True)
def endpoint(x, y, n, r0, nsub, direction):
    for _ in range(n):
        x, y = step(x, y, r0, nsub, direction)
    return x, y


@njit(cache=True)
def endpoints(xs, ys, n, r0, nsub, direction):
    m = xs.shape[0]
    ox = np.empty(m)
    oy = np.empty(m)
    for i in range(m):
        ox[i], oy[i] = endpoint(xs[i], ys[i], n, r0, nsub, direction)
    return ox, oy


# ---------------------------------------------------------------- offsets

@njit(cache=True)
def _pair_rhs(tau, dl, u0, s0, du, ds, ell, r0sq):
    e2 = math.exp(2 * ell * tau)
    rho = u0 * u0 * e2 + s0 * s0 / e2
    e2d = math.exp(2 * ell * dl)
    drho = ((2 * u0 * du + du * du) * e2 * e2d + u0 * u0 * e2 * math.expm1(2 * ell * dl)
            + (2 * s0 * ds + ds * ds) / (e2 * e2d) + (s0 * s0 / e2) * math.expm1(-2 * ell * dl))
    return psi(rho, r0sq), psi_diff(rho, drho, r0sq)


@njit(cache=True)
def _step_offset(u0, s0, du, ds, r0, nsub, direction):
    """Image of the eigen-coordinate offset (du, ds) about base (u0, s0)."""
    ell = LOG_LAMBDA1
    r0sq = r0 * r0
    h = direction / nsub
    tau = 0.0
    dl = 0.0
    for _ in range(nsub):
        k1t, k1d = _pair_rhs(tau, dl, u0, s0, du, ds, ell, r0sq)
        k2t, k2d = _pair_rhs(tau + 0.5 * h * k1t, dl + 0.5 * h * k1d, u0, s0, du, ds, ell, r0sq)
        k3t, k3d = _pair_rhs(tau + 0.5 * h * k2t, dl + 0.5 * h * k2d, u0, s0, du, ds, ell, r0sq)
        k4t, k4d = _pair_rhs(tau + h * k3t, dl + h * k3d, u0, s0, du, ds, ell, r0sq)
        tau += h * (k1t + 2 * k2t + 2 * k3t + k4t) / 6.0
        dl += h * (k1d + 2 * k2d + 2 * k3d + k4d) / 6.0
    e1 = math.exp(ell * tau)
    ed = math.exp(ell * dl)
    du1 = du * e1 * ed + u0 * e1 * math.expm1(ell * dl)
    ds1 = ds / (e1 * ed) + (s0 / e1) * math.expm1(-ell * dl)
    return du1, ds1


@njit(cache=True)
def propagate_offsets(x, y, dx, dy, n, r0, nsub, direction):
    """Carry torus offsets (dx, dy) about (x, y) through n steps.

    Offsets are tracked as differences so tiny balls keep full relative
    precision. Returns the base endpoint and the final offsets."""
    m = dx.shape[0]
    ox = dx.copy()
    oy = dy.copy()
    for _ in range(n):
        wx = lift(x)
        wy = lift(y)
        u0 = EU0 * wx + EU1 * wy
        s0 = ES0 * wx + ES1 * wy
        base_lin = _is_linear(u0, s0, r0, direction)
        for i in range(m):
            du = EU0 * ox[i] + EU1 * oy[i]
            ds = ES0 * ox[i] + ES1 * oy[i]
            if base_lin and _is_linear(u0 + du, s0 + ds, r0, direction):
                if direction > 0:
                    nx = 2 * ox[i] + oy[i]
                    ny = ox[i] + oy[i]
                else:
                    nx = ox[i] - oy[i]
                    ny = 2 * oy[i] - ox[i]
                ox[i] = nx
                oy[i] = ny
            else:
                du1, ds1 = _step_offset(u0, s0, du, ds, r0, nsub, direction)
                ox[i] = EU0 * du1 + ES0 * ds1
                oy[i] = EU1 * du1 + ES1 * ds1
        x, y = step(x, y, r0, nsub, direction)
    return x, y, ox, oy


@njit(cache=True)
def linear_ball(x, y, rad, n, r0, direction):
    """True when every point within rad of the orbit segment moves linearly."""
    if r0 <= 0.0:
        return True
    reach = LAMBDA1 * r0 + rad
    for _ in range(n):
        wx = lift(x)
        wy = lift(y)
        if math.sqrt(wx * wx + wy * wy) <= reach:
            return False
        x, y = step(x, y, r0, 1, direction)
        rad = rad * LAMBDA1
        reach = LAMBDA1 * r0 + rad
    return True


# ---------------------------------------------------------------- splitting

@njit(cache=True)
def _norm2(vx, vy):
    return math.sqrt(vx * vx + vy * vy)


@njit(cache=True)
def line_angle(ax, ay, bx, by):
    cr = abs(ax * by - ay * bx)
    dt = abs(ax * bx + ay * by)
    return math.atan2(cr, dt)


@njit(cache=True)
def unstable_direction(x, y, depth, r0, nsub, v0x, v0y):
    """Push v0 forward from f^{-depth}(p); residual = angle between the
    depth and depth-1 estimates."""
    pts = orbit(x, y, depth, r0, nsub, -1)
    vx, vy = v0x, v0y
    wx, wy = v0x, v0y
    for k in range(depth, 0, -1):
        _, _, jac = step_jac(pts[k, 0], pts[k, 1], r0, nsub, 1)
        nx = jac[0, 0] * vx + jac[0, 1] * vy
        ny = jac[1, 0] * vx + jac[1, 1] * vy
        nn = _norm2(nx, ny)
        vx, vy = nx / nn, ny / nn
        if k <= depth - 1:
            nx = jac[0, 0] * wx + jac[0, 1] * wy
            ny = jac[1, 0] * wx + jac[1, 1] * wy
            nn = _norm2(nx, ny)
            wx, wy = nx / nn, ny / nn
    return vx, vy, line_angle(vx, vy, wx, wy)


@njit(cache=True)
def _inv_apply(jac, vx, vy):
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    return (jac[1, 1] * vx - jac[0, 1] * vy) / det, (-jac[1, 0] * vx + jac[0, 0] * vy) / det


@njit(cache=True)
def stable_direction(x, y, depth, r0, nsub, v0x, v0y):
    _, jacs = orbit_jac(x, y, depth, r0, nsub, 1)
    vx, vy = v0x, v0y
    wx, wy = v0x, v0y
    for k in range(depth - 1, -1, -1):
        nx, ny = _inv_apply(jacs[k], vx, vy)
        nn = _norm2(nx, ny)
        vx, vy = nx / nn, ny / nn
        if k <= depth - 2:
            nx, ny = _inv_apply(jacs[k], wx, wy)
            nn = _norm2(nx, ny)
            wx, wy = nx / nn, ny / nn
    return vx, vy, line_angle(vx, vy, wx, wy)


@njit(cache=True)
def forward_trace(x, y, n, eux, euy, depth_s, r0, nsub, v0x, v0y):
    """Cocycles along the forward orbit x_k = f^k(p), k < n.

    logs_u[k] = -log |Df(x_k) e_u(x_k)|, e_u carried forward from eux, euy.
    logs_s[k] = log |Df(x_k) e_s(x_k)|, e_s from backward pushes starting at
    x_{n + depth_s}.
    """
    pts, jacs = orbit_jac(x, y, n + depth_s, r0, nsub, 1)
    logs_u = np.empty(n)
    logs_s = np.empty(n)
    eu = np.empty((n + 1, 2))
    es = np.empty((n + 1, 2))
    vx, vy = eux, euy
    eu[0, 0] = vx
    eu[0, 1] = vy
    for k in range(n):
        jac = jacs[k]
        nx = jac[0, 0] * vx + jac[0, 1] * vy
        ny = jac[1, 0] * vx + jac[1, 1] * vy
        nn = _norm2(nx, ny)
        logs_u[k] = -math.log(nn)
        vx, vy = nx / nn, ny / nn
        eu[k + 1, 0] = vx
        eu[k + 1, 1] = vy
    vx, vy = v0x, v0y
    for k in range(n + depth_s - 1, -1, -1):
        nx, ny = _inv_apply(jacs[k], vx, vy)
        nn = _norm2(nx, ny)
        vx, vy = nx / nn, ny / nn
        if k <= n:
            es[k, 0] = vx
            es[k, 1] = vy
            if k < n:
                logs_s[k] = math.log(1.0 / nn)
    if n + depth_s == n:
        es[n, 0] = v0x
        es[n, 1] = v0y
    return pts[: n + 1].copy(), logs_u, logs_s, eu, es


@njit(cache=True)
def backward_splitting(x, y, depth, extra, r0, nsub, v0x, v0y):
    """Backward orbit y_k = f^{-k}(p), k <= depth, with e_u and e_s there.

    e_u(y_k) is pushed forward from y_{depth+extra}; e_s(y_k) is pushed
    backward from f^{extra}(p)."""
    tot = depth + extra
    bpts = orbit(x, y, tot, r0, nsub, -1)
    eu = np.empty((depth + 1, 2))
    es = np.empty((depth + 1, 2))
    jfu = np.empty(depth + 1)
    vx, vy = v0x, v0y
    for k in range(tot, 0, -1):
        _, _, jac = step_jac(bpts[k, 0], bpts[k, 1], r0, nsub, 1)
        nx = jac[0, 0] * vx + jac[0, 1] * vy
        ny = jac[1, 0] * vx + jac[1, 1] * vy
        nn = _norm2(nx, ny)
        if k <= depth:
            jfu[k] = nn
        vx, vy = nx / nn, ny / nn
        if k - 1 <= depth:
            eu[k - 1, 0] = vx
            eu[k - 1, 1] = vy
    _, _, jac = step_jac(x, y, r0, nsub, 1)
    jfu[0] = _norm2(jac[0, 0] * eu[0, 0] + jac[0, 1] * eu[0, 1], jac[1, 0] * eu[0, 0] + jac[1, 1] * eu[0, 1])
    _, fj = orbit_jac(x, y, extra, r0, nsub, 1)
    vx, vy = v0x, v0y
    for k in range(extra - 1, -1, -1):
        nx, ny = _inv_apply(fj[k], vx, vy)
        nn = _norm2(nx, ny)
        vx, vy = nx / nn, ny / nn
    es[0, 0] = vx
    es[0, 1] = vy
    for k in range(1, depth + 1):
        _, _, jac = step_jac(bpts[k, 0], bpts[k, 1], r0, nsub, 1)
        nx, ny = _inv_apply(jac, vx, vy)
        nn = _norm2(nx, ny)
        vx, vy = nx / nn, ny / nn
        es[k, 0] = vx
        es[k, 1] = vy
    return bpts[: depth + 1].copy(), eu, es, jfu


# ---------------------------------------------------------------- returns

@njit(cache=True)
def torus_dist0(x, y):
    wx = lift(x)
    wy = lift(y)
    return math.sqrt(wx * wx + wy * wy)


@njit(cache=True)
def _good_point(x, y, vx, vy, jprev, eps1, thr, look, r0, nsub, has_s, v0x, v0y, logju_prev):
    if has_s and torus_dist0(x, y) < eps1:
        return False
    if logju_prev < thr:
        return False
    pts, jacs = orbit_jac(x, y, look, r0, nsub, 1)
    j0 = jacs[0]
    q1 = math.log(_norm2(j0[0, 0] * vx + j0[0, 1] * vy, j0[1, 0] * vx + j0[1, 1] * vy))
    if q1 < thr:
        return False
    sx, sy = v0x, v0y
    for k in range(look - 1, -1, -1):
        nx, ny = _inv_apply(jacs[k], sx, sy)
        nn = _norm2(nx, ny)
        sx, sy = nx / nn, ny / nn
    q3 = -math.log(_norm2(j0[0, 0] * sx + j0[0, 1] * sy, j0[1, 0] * sx + j0[1, 1] * sy))
    if q3 < thr:
        return False
    px, py = _inv_apply(jprev, sx, sy)
    q4 = math.log(_norm2(px, py))
    return q4 >= thr


@njit(cache=True)
def induce_batch(xs, ys, vxs, vys, log_r, eps1, thr, cap, look, r0, nsub, has_s, v0x, v0y):
    """First r-hyperbolic time landing on an Omega_3 point, per particle.

    tau = 0 marks NoReturn within cap."""
    m = xs.shape[0]
    taus = np.zeros(m, dtype=np.int64)
    ox = xs.copy()
    oy = ys.copy()
    ovx = vxs.copy()
    ovy = vys.copy()
    for i in range(m):
        x = xs[i]
        y = ys[i]
        vx = vxs[i]
        vy = vys[i]
        t = 0.0
        tmin = 0.0
        for n in range(1, cap + 1):
            x1, y1, jac = step_jac(x, y, r0, nsub, 1)
            nx = jac[0, 0] * vx + jac[0, 1] * vy
            ny = jac[1, 0] * vx + jac[1, 1] * vy
            nn = _norm2(nx, ny)
            vx, vy = nx / nn, ny / nn
            x, y = x1, y1
            t += -math.log(nn) - log_r
            if t <= tmin:
                if _good_point(x, y, vx, vy, jac, eps1, thr, look, r0, nsub, has_s, v0x, v0y, math.log(nn)):
                    taus[i] = n
                    break
            if t < tmin:
                tmin = t
        ox[i] = x
        oy[i] = y
        ovx[i] = vx
        ovy[i] = vy
    return taus, ox, oy, ovx, ovy


@njit(cache=True)
def spread_points(xs, ys, taus, r0, nsub):
    tot = 0
    for i in range(xs.shape[0]):
        tot += taus[i]
    out = np.empty((tot, 2))
    owner = np.empty(tot, dtype=np.int64)
    c = 0
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        for j in range(taus[i]):
            out[c, 0] = x
            out[c, 1] = y
            owner[c] = i
            c += 1
            x, y = step(x, y, r0, nsub, 1)
    return out, owner


@njit(cache=True)
def occupation(x, y, n, r0, nsub, bins):
    """Visit counts of f^k(x, y), k < n, on a bins x bins grid plus the
    final point."""
    h = np.zeros((bins, bins))
    for _ in range(n):
        i = min(int(x * bins), bins - 1)
        j = min(int(y * bins), bins - 1)
        h[i, j] += 1.0
        x, y = step(x, y, r0, nsub, 1)
    return h, x, y


@njit(cache=True)
def first_exit(x, y, eps1, cap, r0, nsub, direction):
    """Smallest k >= 1 with d(f^k(p), 0) >= eps1, or -1 if none up to cap."""
    for k in range(1, cap + 1):
        x, y = step(x, y, r0, nsub, direction)
        if torus_dist0(x, y) >= eps1:
            return k
    return -1


# ---------------------------------------------------------------- graphs

@njit(cache=True)
def _pchip_edge(h0, h1, m0, m1):
    d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    if np.sign(d) != np.sign(m0):
        return 0.0
    if np.sign(m0) != np.sign(m1) and abs(d) > 3.0 * abs(m0):
        return 3.0 * m0
    return d


@njit(cache=True)
def pchip_eval(x, y, xq):
    """Monotone cubic (Fritsch-Carlson, same slope rule as scipy) at sorted xq."""
    n = x.shape[0]
    h = x[1:] - x[:-1]
    m = (y[1:] - y[:-1]) / h
    d = np.zeros(n)
    if n == 2:
        d[0] = m[0]
        d[1] = m[0]
    else:
        for k in range(1, n - 1):
            if m[k - 1] * m[k] > 0:
                w1 = 2 * h[k] + h[k - 1]
                w2 = h[k] + 2 * h[k - 1]
                d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k])
        d[0] = _pchip_edge(h[0], h[1], m[0], m[1])
        d[n - 1] = _pchip_edge(h[n - 2], h[n - 3], m[n - 2], m[n - 3])
    out = np.empty(xq.shape[0])
    i = 0
    for j in range(xq.shape[0]):
        q = xq[j]
        while i < n - 2 and q > x[i + 1]:
            i += 1
        hh = h[i]
        t = (q - x[i]) / hh
        t2 = t * t
        t3 = t2 * t
        out[j] = ((2 * t3 - 3 * t2 + 1) * y[i] + (t3 - 2 * t2 + t) * hh * d[i]
                  + (-2 * t3 + 3 * t2) * y[i + 1] + (t3 - t2) * hh * d[i + 1])
    return out


@njit(cache=True)
def linear_run(u, s, Ts, caps, lip_tol):
    """Chain of affine graph transforms (one per row of Ts) with re-gridding.

    Returns grid, graph, pre-clamp image radii and a status: -1 when all
    steps succeeded, else the failing step (non-monotone or Lip > 1)."""
    n = u.shape[0]
    mid = n // 2
    m = Ts.shape[0]
    img = np.empty(m)
    U = np.empty(n)
    S = np.empty(n)
    for k in range(m):
        T = Ts[k]
        for i in range(n):
            U[i] = T[0, 0] * u[i] + T[0, 1] * s[i]
            S[i] = T[1, 0] * u[i] + T[1, 1] * s[i]
        U[mid] = 0.0
        S[mid] = 0.0
        for i in range(n - 1):
            if not U[i + 1] > U[i]:
                return u, s, img, k
        li = min(U[n - 1], -U[0])
        img[k] = li
        l = min(li, caps[k])
        grid = np.linspace(-l, l, n)
        s = pchip_eval(U, S, grid)
        s[mid] = 0.0
        u = grid
        for i in range(n - 1):
            if abs((s[i + 1] - s[i]) / (u[i + 1] - u[i])) > 1.0 + lip_tol:
                return u, s, img, k
    return u, s, img, -1
