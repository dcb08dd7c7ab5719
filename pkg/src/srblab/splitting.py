"""Finite-depth estimates of E^u + E^s, cocycles and J^u."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dynamics import E_S, E_U, MapModel, TorusPoint, _pt, tangent
from .errors import NonConvergence

SEED_VECTOR = (1.0, 0.37)
RESIDUAL_TOL = 1e-6
DEFAULT_DEPTH = 40


@dataclass(frozen=True)
class SplittingSample:
    point: TorusPoint
    e_u: np.ndarray
    e_s: np.ndarray
    depth: int
    residual: float

    @property
    def angle(self):
        return float(K.line_angle(self.e_u[0], self.e_u[1], self.e_s[0], self.e_s[1]))


@dataclass
class CocycleTrace:
    base: TorusPoint
    direction: str
    logs: np.ndarray

    def partial_sums(self):
        return np.cumsum(self.logs)


def orient(v, ref):
    v = np.asarray(v, dtype=float)
    return -v if v @ ref < 0 else v


def _at_S(model, p):
    return model.has_S and p.x == 0.0 and p.y == 0.0


def estimate_splitting(model: MapModel, p, depth: int = DEFAULT_DEPTH, tol: float = RESIDUAL_TOL) -> SplittingSample:
    p = _pt(p)
    depth = int(depth)
    if depth < 8:
        raise ValueError("depth must be >= 8")
    if _at_S(model, p):
        # the fixed point keeps the construction's eigen-axes
        return SplittingSample(p, E_U.copy(), E_S.copy(), depth, 0.0)
    v0x, v0y = SEED_VECTOR
    ux, uy, ru = K.unstable_direction(p.x, p.y, depth, model.kr0, model.nsub, v0x, v0y)
    sx, sy, rs = K.stable_direction(p.x, p.y, depth, model.kr0, model.nsub, v0x, v0y)
    res = max(ru, rs)
    if not res <= tol:
        raise NonConvergence(f"splitting residual {res:.3e} > {tol:.1e} at ({p.x:.6f}, {p.y:.6f}), depth {depth}")
    return SplittingSample(p, orient((ux, uy), E_U), orient((sx, sy), E_S), depth, float(res))


@dataclass
class OrbitTrace:
    """Forward orbit x_k = f^k(p), k <= n, with the splitting carried along."""
    points: np.ndarray
    logs_u: np.ndarray   # log |df^{-1}|E^u(x_{k+1})|
    logs_s: np.ndarray   # log |df|E^s(x_k)|
    e_u: np.ndarray
    e_s: np.ndarray
    log_ju_prev: float   # log J^u(f^{-1}(p))


def trace_orbit(model, p, n, depth=DEFAULT_DEPTH, split=None):
    p = _pt(p)
    if split is None:
        split = estimate_splitting(model, p, depth)
    v0x, v0y = SEED_VECTOR
    if _at_S(model, p):
        v0x, v0y = E_S
    pts, lu, ls, eu, es = K.forward_trace(p.x, p.y, int(n), split.e_u[0], split.e_u[1], int(depth),
                                          model.kr0, model.nsub, v0x, v0y)
    jinv = tangent(model, p, inverse=True).as_array()
    prev = -np.log(np.linalg.norm(jinv @ split.e_u))
    return OrbitTrace(pts, lu, ls, eu, es, float(prev))


def cocycle_trace(model, p, direction, n, depth=DEFAULT_DEPTH) -> CocycleTrace:
    if n < 1:
        raise ValueError("n must be >= 1")
    if direction not in ("unstable", "stable"):
        raise ValueError("direction must be 'unstable' or 'stable'")
    tr = trace_orbit(model, p, n, depth)
    logs = tr.logs_u if direction == "unstable" else tr.logs_s
    return CocycleTrace(_pt(p), direction, logs.copy())


def unstable_jacobian(model, p, depth=DEFAULT_DEPTH) -> float:
    sp = estimate_splitting(model, p, depth)
    return float(np.linalg.norm(tangent(model, p).as_array() @ sp.e_u))


def backward_trace(model, p, n, extra=DEFAULT_DEPTH):
    """Backward orbit y_k = f^{-k}(p) with e_u, e_s and J^u(y_k), k <= n."""
    p = _pt(p)
    v0x, v0y = SEED_VECTOR
    return K.backward_splitting(p.x, p.y, int(n), int(extra), model.kr0, model.nsub, v0x, v0y)


def splitting_field(model, pts, depth=DEFAULT_DEPTH):
    """e_u, e_s at many points; raises on the first non-converged one."""
    pts = np.atleast_2d(pts)
    eu = np.empty_like(pts)
    es = np.empty_like(pts)
    for i, q in enumerate(pts):
        sp = estimate_splitting(model, q, depth)
        eu[i] = sp.e_u
        es[i] = sp.e_s
    return eu, es
