"""Torus phase space and the two built-in maps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K

LAMBDA1 = K.LAMBDA1
LOG_LAMBDA1 = K.LOG_LAMBDA1
E_U = np.array([K.EU0, K.EU1])
E_S = np.array([K.ES0, K.ES1])
CAT = np.array([[2.0, 1.0], [1.0, 1.0]])
CAT_INV = np.array([[1.0, -1.0], [-1.0, 2.0]])

# small enough that the flow-saturated slow-down region (radius LAMBDA1 * r0)
# plus a full chart ball of radius rho1 = 0.02 fits inside B(S, 0.05)
DEFAULT_R0 = 0.008
KINDS = ("linear_cat", "neutral_cat")


class TorusPoint(NamedTuple):
    x: float
    y: float

    @classmethod
    def make(cls, x, y):
        return cls(K.wrap01(float(x)), K.wrap01(float(y)))

    def as_array(self):
        return np.array([self.x, self.y])


class TangentMatrix(NamedTuple):
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_array(cls, m):
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def as_array(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def det(self):
        return self.a * self.d - self.b * self.c


@dataclass(frozen=True)
class ExceptionalSet:
    points: tuple = ()

    def __contains__(self, p):
        return any(torus_distance(p, q) == 0.0 for q in self.points)


@dataclass(frozen=True)
class MapModel:
    kind: str = "linear_cat"
    r0: float = DEFAULT_R0
    integrator_steps: int = 64

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if int(self.integrator_steps) < 1:
            raise ValueError("integrator_steps must be positive")
        if self.kind == "neutral_cat" and not (0.0 < self.r0 < 0.15):
            raise ValueError("r0 must lie in (0, 0.15)")

    # effective disk radius handed to the kernels (0 means purely linear)
    @property
    def kr0(self) -> float:
        return self.r0 if self.kind == "neutral_cat" else 0.0

    @property
    def nsub(self) -> int:
        return int(self.integrator_steps)

    @property
    def exceptional(self) -> ExceptionalSet:
        if self.kind == "neutral_cat":
            return ExceptionalSet((TorusPoint(0.0, 0.0),))
        return ExceptionalSet(())

    @property
    def has_S(self) -> bool:
        return self.kind == "neutral_cat"

    def params(self):
        d = {"kind": self.kind, "integrator_steps": self.nsub}
        if self.kind == "neutral_cat":
            d["r0"] = self.r0
        return d


def linear_cat():
    return MapModel("linear_cat")


def neutral_cat(r0=DEFAULT_R0, integrator_steps=64):
    return MapModel("neutral_cat", r0=r0, integrator_steps=integrator_steps)


def _pt(p):
    if isinstance(p, TorusPoint):
        return p
    return TorusPoint.make(p[0], p[1])


def apply(model: MapModel, p, n: int) -> TorusPoint:
    p = _pt(p)
    n = int(n)
    if n == 0:
        return p
    d = 1 if n > 0 else -1
    x, y = K.endpoint(p.x, p.y, abs(n), model.kr0, model.nsub, d)
    return TorusPoint(x, y)


def apply_inverse(model, p, n=1):
    return apply(model, p, -n)


def tangent(model: MapModel, p, inverse=False) -> TangentMatrix:
    p = _pt(p)
    _, _, jac = K.step_jac(p.x, p.y, model.kr0, model.nsub, -1 if inverse else 1)
    return TangentMatrix.from_array(jac)


def orbit(model, p, n):
    """Array of f^k(p), k = 0..|n| (backward when n < 0)."""
    p = _pt(p)
    return K.orbit(p.x, p.y, abs(int(n)), model.kr0, model.nsub, 1 if n >= 0 else -1)


def orbit_tangents(model, p, n):
    p = _pt(p)
    return K.orbit_jac(p.x, p.y, abs(int(n)), model.kr0, model.nsub, 1 if n >= 0 else -1)


def apply_many(model, pts, n):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if n == 0:
        return pts.copy()
    ox, oy = K.endpoints(pts[:, 0].copy(), pts[:, 1].copy(), abs(int(n)), model.kr0, model.nsub, 1 if n > 0 else -1)
    return np.column_stack([ox, oy])


def torus_delta(p, q):
    """Shortest displacement q - p on the torus (vectorized)."""
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    return d - np.floor(d + 0.5)


def torus_distance(p, q) -> float:
    # min over the 9 integer shifts; the centered lift gives the same value
    d = torus_delta(p, q)
    return float(np.hypot(d[..., 0], d[..., 1]))


def torus_distances(p, q):
    d = torus_delta(p, q)
    return np.hypot(d[..., 0], d[..., 1])


def distance_to_S(model: MapModel, p) -> float:
    if not model.has_S:
        return math.inf
    p = _pt(p)
    return float(K.torus_dist0(p.x, p.y))


def distances_to_S(model, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if not model.has_S:
        return np.full(len(pts), np.inf)
    return torus_distances(np.zeros(2), pts)


def modification_radius(model) -> float:
    """Radius outside which f and f^{-1} coincide with the cat map exactly."""
    return LAMBDA1 * model.kr0


def kappa_hat(model, grid=129):
    """max over a grid of max(|df|, |df^{-1}|); the neutral region is refined."""
    if not model.has_S:
        return float(np.linalg.norm(CAT, 2))
    g = (np.arange(grid) + 0.5) / grid
    pts = [(a, b) for a in g for b in g]
    rr = 3 * modification_radius(model)
    loc = np.linspace(-rr, rr, grid)
    pts += [(a % 1.0, b % 1.0) for a in loc for b in loc]
    best = 0.0
    for x, y in pts:
        for d in (1, -1):
            _, _, jac = K.step_jac(x, y, model.kr0, model.nsub, d)
            best = max(best, np.linalg.norm(jac, 2))
    return float(best)


def A_hat(model, grid=129):
    """max |df| sampled as in kappa_hat (forward only)."""
    if not model.has_S:
        return float(np.linalg.norm(CAT, 2))
    rr = 3 * modification_radius(model)
    loc = np.linspace(-rr, rr, grid)
    best = float(np.linalg.norm(CAT, 2))
    for a in loc:
        for b in loc:
            _, _, jac = K.step_jac(a % 1.0, b % 1.0, model.kr0, model.nsub, 1)
            best = max(best, np.linalg.norm(jac, 2))
    return best
