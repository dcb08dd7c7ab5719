"""srblab command line: analyze-orbit, hyperbolic-times, grow-manifold, estimate-srb, validate."""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from . import acceptance, io
from .config import RunConfig
from .dynamics import DEFAULT_R0, LAMBDA1
from .errors import NumericalError, SRBLabError
from .graph_transform import N_SAMPLES, grow_unstable_manifold, truncation_bounded, verify_tangency
from .hyperbolicity import analyze_orbit, pliss_times, theta_density
from .inducing import BINS, distortion_check, push_measure, spread_to_srb, tau_statistics
from .splitting import trace_orbit

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("analyze-orbit", "hyperbolic-times", "grow-manifold", "estimate-srb", "validate")
BUDGET_FLAGS = {
    "analyze-orbit": ("horizon",),
    "hyperbolic-times": ("horizon",),
    "grow-manifold": ("depth",),
    "estimate-srb": ("depth", "particles", "generations", "cap"),
    "validate": ("particles", "generations", "orbit_len", "n_orbits", "points"),
}


class ConfigError(SRBLabError):
    kind = "config"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser():
    ap = _Parser(prog="srblab", description=__doc__)
    sub = ap.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--model", choices=("linear_cat", "neutral_cat"))
        sp.add_argument("--config", help="JSON run configuration; flags override its values")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        if name != "validate":
            sp.add_argument("--point", type=float, nargs=2, metavar=("X", "Y"))
        for b in BUDGET_FLAGS[name]:
            sp.add_argument("--" + b.replace("_", "-"), dest=b, type=int)
        if name == "estimate-srb":
            sp.add_argument("--full-measure", action="store_true", help="write every spread particle")
        if name == "validate":
            sp.add_argument("--criteria", type=int, nargs="+", choices=range(1, 10))
    return ap


def _config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    budgets = {b: getattr(args, b, None) for b in ("horizon", "depth", "particles", "generations", "orbit_len",
                                                   "n_orbits", "cap", "points")}
    return cfg.override(model=args.model, seed=args.seed, out=args.out, point=getattr(args, "point", None),
                        **budgets)


# ------------------------------------------------------------ commands

def cmd_analyze_orbit(cfg, out, args):
    b = cfg.budgets
    r = analyze_orbit(cfg.model, cfg.point, cfg.params, b.horizon)
    io.write_kv(os.path.join(out, "report.txt"), {
        "x": r.base.x, "y": r.base.y, "horizon": r.horizon, "n_plus": r.n_plus, "n_minus": r.n_minus,
        "liminf_u": r.liminf_u, "liminf_s": r.liminf_s, "theta_hat": r.theta_hat, "ratio_sup": r.ratio_sup,
        "lambda_hyperbolic": r.verdict_lambda, "bounded_type": r.verdict_bounded,
    })
    io.write_table(os.path.join(out, "tags.txt"), ["k", "tag"], enumerate(r.region_tags.tolist()))
    io.write_table(os.path.join(out, "qualifying.txt"), ["seq", "k", "time"],
                   [("s", i, int(v)) for i, v in enumerate(r.s_k)] + [("t", i, int(v)) for i, v in enumerate(r.t_k)])
    return ["report.txt", "tags.txt", "qualifying.txt"], {"liminf_u": r.liminf_u, "liminf_s": r.liminf_s}


def cmd_hyperbolic_times(cfg, out, args):
    n = cfg.budgets.horizon
    tr = trace_orbit(cfg.model, cfg.point, n)
    pl = pliss_times(tr.logs_u, cfg.params.r0_time)
    io.write_table(os.path.join(out, "pliss_times.txt"), ["time"], [(t,) for t in pl])
    theta = theta_density(pl, n)
    io.write_kv(os.path.join(out, "theta.txt"), {"horizon": n, "r0_time": cfg.params.r0_time, "count": len(pl),
                                                 "theta_hat": theta})
    return ["pliss_times.txt", "theta.txt"], {"theta_hat": theta}


def cmd_grow_manifold(cfg, out, args):
    depth = cfg.budgets.depth
    g, log = grow_unstable_manifold(cfg.model, cfg.point, depth, cfg.params)
    io.write_patch(os.path.join(out, "patch.txt"), g)
    io.write_table(os.path.join(out, "truncations.txt"), ["q", "p", "m", "lf", "lb", "truncated"],
                   zip(log.q, log.p, log.m, log.lf, log.lb, log.truncated))
    io.write_table(os.path.join(out, "i_of_n.txt"), ["n", "i"], enumerate(log.i_of_n))
    tv = truncation_bounded(log, depth)
    ang = verify_tangency(cfg.model, g)
    io.write_kv(os.path.join(out, "summary.txt"), {"radius": g.radius, "lip": g.lip, "excursions": len(log.q),
                                                   "max_i_of_n": max(log.i_of_n, default=0),
                                                   "truncation_bounded": tv.verdict, "gamma_hat": tv.gamma_hat,
                                                   "interlaced": log.interlaced(), "tangency_angle": ang})
    return ["patch.txt", "truncations.txt", "i_of_n.txt", "summary.txt"], {"radius": g.radius}


def cmd_estimate_srb(cfg, out, args):
    b, P = cfg.budgets, cfg.params
    g, _ = grow_unstable_manifold(cfg.model, cfg.point, b.depth, P)
    mu, rs = push_measure(cfg.model, g, b.particles, b.generations, P, cap=b.cap, seed=cfg.seed)
    st = tau_statistics(rs, seed=cfg.seed)
    srb = spread_to_srb(cfg.model, mu, rs, P, verdict=st.integrable_verdict, seed=cfg.seed)
    dr = distortion_check(cfg.model, g, 30, 64, seed=cfg.seed)
    files = ["measure.txt", "histogram.txt", "histogram_mu.txt", "tau_stats.txt", "distortion.txt"]
    if args.full_measure:
        io.write_measure(os.path.join(out, "measure.txt"), srb)
    else:
        last = mu.meta["gen_counts"][-1]
        part = type(mu)(mu.points[-last:], mu.weights[-last:] * (b.generations - mu.meta["burn_in"]),
                        {k: v for k, v in mu.meta.items() if k not in ("gen_counts", "snapshots")})
        io.write_measure(os.path.join(out, "measure.txt"), part)
    io.write_matrix(os.path.join(out, "histogram.txt"), srb.histogram(BINS))
    io.write_matrix(os.path.join(out, "histogram_mu.txt"), mu.histogram(BINS))
    io.write_kv(os.path.join(out, "tau_stats.txt"), {"n": st.n, "mean": st.mean, "median": st.median,
                                                     "tail_fit": st.tail_fit, "half_mean": st.half_mean,
                                                     "integrable_verdict": st.integrable_verdict,
                                                     "leakage": mu.meta["leakage"]})
    io.write_kv(os.path.join(out, "distortion.txt"), {"n": dr.n, "max_log_ratio": dr.max_log_ratio,
                                                      "omega0_hat": dr.omega0_hat, "chi1_hat": dr.chi1_hat,
                                                      "kappa_hat": dr.kappa_hat, "bound": dr.bound})
    return files, {"tau_mean": st.mean, "leakage": mu.meta["leakage"]}


def cmd_validate(cfg, out, args):
    b = dict(acceptance.FULL)
    bud = cfg.budgets
    if args.particles is not None:
        b["c1_particles"] = b["c8_particles"] = bud.particles
    if args.generations is not None:
        b["c1_generations"] = b["c8_generations"] = bud.generations
    if args.orbit_len is not None:
        b["c8_orbit_len"] = bud.orbit_len
    if args.n_orbits is not None:
        b["c8_orbits"] = bud.n_orbits
    if args.points is not None:
        b["c3_points"] = b["c4_points"] = b["c9_points"] = bud.points
    res = acceptance.run_all(cfg.model.kind, b, cfg.seed, set(args.criteria or ()) or None, echo=print)
    io.write_table(os.path.join(out, "acceptance.txt"), ["criterion", "status", "seconds", "name", "value"],
                   [(r.number, r.status, f"{r.seconds:.1f}", r.name.replace(" ", "_"), r.value.replace(" ", ";"))
                    for r in res])
    failed = [r.number for r in res if r.status == "FAIL"]
    if failed:
        raise AcceptanceFailure(f"criteria failed: {failed}")
    return ["acceptance.txt"], {"failed": failed}


class AcceptanceFailure(NumericalError):
    pass


HANDLERS = {"analyze-orbit": cmd_analyze_orbit, "hyperbolic-times": cmd_hyperbolic_times,
            "grow-manifold": cmd_grow_manifold, "estimate-srb": cmd_estimate_srb, "validate": cmd_validate}


# ------------------------------------------------------------ plumbing

def _versions():
    import numba
    import scipy
    return {"srblab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def write_manifest(out, command, cfg, status, code, files, extra, elapsed, argv):
    text = cfg.dumps() if cfg is not None else ""
    d = {"command": command, "argv": list(argv), "exit_code": code, "status": status,
         "config_sha256": io.sha256_text(text), "seed": cfg.seed if cfg else None,
         "model": cfg.model.params() if cfg else None,
         "constants": {"lambda1": LAMBDA1, "default_r0": DEFAULT_R0, "graph_samples": N_SAMPLES, "bins": BINS,
                       "C_graph": cfg.params.C_graph if cfg else None},
         "versions": _versions(), "outputs": files, "results": extra, "elapsed_s": round(elapsed, 3)}
    io.write_kv(os.path.join(out, "manifest.txt"), d)
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as f:
        f.write(text)


def error_record(kind, code, exc):
    msg = " ".join(str(exc).split())
    return json.dumps({"error": type(exc).__name__, "kind": kind, "exit_code": code, "message": msg},
                      sort_keys=True)


def _classify(exc):
    if isinstance(exc, SRBLabError):
        return exc.kind, EXIT_CONFIG if exc.kind == "config" else EXIT_NUMERICAL
    if isinstance(exc, OSError):
        return "io", EXIT_IO
    if isinstance(exc, (ValueError, TypeError, KeyError, json.JSONDecodeError)):
        return "config", EXIT_CONFIG
    if isinstance(exc, (FloatingPointError, ArithmeticError, np.linalg.LinAlgError)):
        return "numerical", EXIT_NUMERICAL
    raise exc


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    parser = build_parser()
    cfg = None
    out = None
    command = None
    try:
        args = parser.parse_args(argv)
        command = args.command
        if command is None:
            parser.print_usage(sys.stderr)
            raise ConfigError("missing subcommand")
        out = args.out
        cfg = _config(args)
        out = cfg.output_dir
        os.makedirs(out, exist_ok=True)
        with np.errstate(all="ignore"):
            files, extra = HANDLERS[command](cfg, out, args)
        write_manifest(out, command, cfg, "ok", EXIT_OK, files, extra, time.perf_counter() - t0, argv)
        return EXIT_OK
    except Exception as exc:
        kind, code = _classify(exc)
        print(error_record(kind, code, exc), file=sys.stderr)
        if out is not None:
            try:
                write_manifest(out, command, cfg, kind, code, [], {"error": str(exc)}, time.perf_counter() - t0, argv)
            except OSError:
                pass
        return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
