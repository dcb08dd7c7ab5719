"""Run configuration: JSON file, CLI overrides, bit-exact round trip."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .dynamics import DEFAULT_R0, MapModel
from .hyperbolicity import RegionParams

MINIMA = {"horizon": 100, "depth": 8, "particles": 1000, "generations": 1, "orbit_len": 1000,
          "n_orbits": 1, "cap": 1, "points": 1}


@dataclass(frozen=True)
class Budgets:
    horizon: int = 10**4
    depth: int = 10**4
    particles: int = 10**5
    generations: int = 50
    orbit_len: int = 10**6
    n_orbits: int = 32
    cap: int = 10**5
    points: int = 100

    def __post_init__(self):
        for k, lo in MINIMA.items():
            v = getattr(self, k)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"budget {k} must be an integer")
            if v < lo:
                raise ValueError(f"budget {k} = {v} below minimum {lo}")


@dataclass(frozen=True)
class RunConfig:
    model: MapModel = field(default_factory=lambda: MapModel("neutral_cat"))
    params: RegionParams = field(default_factory=RegionParams)
    seed: int = 0
    budgets: Budgets = field(default_factory=Budgets)
    output_dir: str = "out"
    point: tuple = (0.3, 0.2)

    def to_dict(self):
        return {
            "model": {"kind": self.model.kind, "r0": self.model.r0, "integrator_steps": self.model.integrator_steps},
            "params": dataclasses.asdict(self.params),
            "seed": self.seed,
            "budgets": dataclasses.asdict(self.budgets),
            "output_dir": self.output_dir,
            "point": list(self.point),
        }

    def dumps(self):
        # json writes floats with repr, so parsing back is exact
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {"model", "params", "seed", "budgets", "output_dir", "point"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        m = dict(d.get("model", {}))
        model = MapModel(m.pop("kind", "neutral_cat"), float(m.pop("r0", DEFAULT_R0)),
                         int(m.pop("integrator_steps", 64)))
        if m:
            raise ValueError(f"unknown model keys {sorted(m)}")
        params = RegionParams(**d.get("params", {}))
        budgets = Budgets(**d.get("budgets", {}))
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ValueError("seed must be a non-negative integer")
        pt = tuple(float(v) for v in d.get("point", (0.3, 0.2)))
        if len(pt) != 2:
            raise ValueError("point must have two coordinates")
        return cls(model, params, seed, budgets, str(d.get("output_dir", "out")), pt)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.loads(f.read())

    def override(self, model=None, seed=None, out=None, point=None, **budgets):
        """CLI flags take precedence over file values."""
        cfg = self
        if model is not None:
            cfg = dataclasses.replace(cfg, model=MapModel(model, cfg.model.r0, cfg.model.integrator_steps))
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=int(seed))
        if out is not None:
            cfg = dataclasses.replace(cfg, output_dir=str(out))
        if point is not None:
            cfg = dataclasses.replace(cfg, point=tuple(float(v) for v in point))
        b = {k: v for k, v in budgets.items() if v is not None}
        if b:
            cfg = dataclasses.replace(cfg, budgets=dataclasses.replace(cfg.budgets, **b))
        return cfg
