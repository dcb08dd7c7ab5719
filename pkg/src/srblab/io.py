"""Plain-text tables: patches, measures, histograms, manifests."""
from __future__ import annotations

import hashlib
import json
import math
import os

import numpy as np

from .dynamics import TorusPoint
from .graph_transform import GraphPatch, _lip
from .inducing import EmpiricalMeasure

FMT = "%.17g"


def _open_w(path):
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n")


def _g(v):
    return FMT % v


def write_patch(path, g: GraphPatch):
    with _open_w(path) as f:
        f.write("# base_x base_y radius n_samples\n")
        f.write(f"# {_g(g.base.x)} {_g(g.base.y)} {_g(g.radius)} {g.n_samples}\n")
        f.write("# axes " + " ".join(_g(v) for v in (*g.e_u, *g.e_s)) + "\n")
        for u, s in g.samples:
            f.write(f"{_g(u)} {_g(s)}\n")


def read_patch(path) -> GraphPatch:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if len(lines) < 3 or not lines[0].startswith("# base_x"):
        raise ValueError(f"{path}: not a patch table")
    bx, by, rad, n = lines[1][1:].split()
    ax = [float(v) for v in lines[2].split()[2:]]
    data = np.loadtxt(lines[3:], ndmin=2)
    if len(data) != int(n):
        raise ValueError(f"{path}: expected {n} samples, found {len(data)}")
    return GraphPatch(TorusPoint(float(bx), float(by)), float(rad), data, _lip(data[:, 0], data[:, 1]),
                      np.array(ax[:2]), np.array(ax[2:]))


def _meta_line(meta):
    keep = {k: v for k, v in meta.items() if isinstance(v, (int, float, str)) and not isinstance(v, bool)}
    return "# " + " ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in sorted(keep.items()))


def write_measure(path, m: EmpiricalMeasure):
    with _open_w(path) as f:
        f.write(_meta_line(m.meta) + "\n")
        f.write("# x y weight\n")
        np.savetxt(f, np.column_stack([m.points, m.weights]), fmt=FMT)


def _parse_value(v):
    for t in (int, float):
        try:
            return t(v)
        except ValueError:
            pass
    return v


def read_measure(path) -> EmpiricalMeasure:
    with open(path, encoding="utf-8") as f:
        head = f.readline()
        f.readline()
        data = np.loadtxt(f, ndmin=2)
    meta = dict(kv.split("=", 1) for kv in head[1:].split())
    meta = {k: _parse_value(v) for k, v in meta.items()}
    if data.size == 0:
        data = np.empty((0, 3))
    return EmpiricalMeasure(data[:, :2].copy(), data[:, 2].copy(), meta)


def write_matrix(path, h):
    with _open_w(path) as f:
        np.savetxt(f, np.asarray(h), fmt=FMT)


def read_matrix(path):
    return np.loadtxt(path, ndmin=2)


def write_table(path, header, rows):
    """Whitespace table with a '# col col ...' header."""
    with _open_w(path) as f:
        f.write("# " + " ".join(header) + "\n")
        for r in rows:
            f.write(" ".join(_cell(v) for v in r) + "\n")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _g(float(v))
    if v is None:
        return "nan"
    return str(v)


def read_table(path):
    with open(path, encoding="utf-8") as f:
        header = f.readline()[1:].split()
        rows = [[_parse_value(c) for c in ln.split()] for ln in f if ln.strip()]
    return header, rows


def write_kv(path, d):
    with _open_w(path) as f:
        for k, v in d.items():
            f.write(f"{k} = {_kv(v)}\n")


def _kv(v):
    # JSON values: repr floats (exact), NaN/Infinity tokens, typed on the way back
    return json.dumps(v, sort_keys=True, default=_plain)


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def read_kv(path):
    out = {}
    with open(path, encoding="utf-8") as f:
        for ln in f:
            if not ln.strip() or ln.startswith("#"):
                continue
            k, v = ln.rstrip("\n").split(" = ", 1)
            out[k] = json.loads(v)
    return out


def sha256_text(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
