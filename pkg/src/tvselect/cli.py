"""Command-line front end: ``tvselect <verb> [options]``.

Exit codes: 0 on success, 2 for configuration or input errors, 3 when a
solver fails numerically.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import OUTPUT_ENV, ExperimentConfig, error_exit_code, run_experiment, run_table
from .imageio import atomic_write_bytes, save_image
from .phantoms import SYNTHETIC, named_image

VERBS = ("denoise", "deblur", "select-scalar", "select-local", "synth", "run-table")


def _common(p):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags given explicitly override it")
    p.add_argument("--image", help=f"ground truth: one of {sorted(SYNTHETIC)} or a PGM/PNG path")
    p.add_argument("--size", type=int, help="size of synthetic images")
    p.add_argument("--degraded", help="use this already degraded observation instead of adding noise")
    p.add_argument("--noise", choices=("gaussian", "salt_pepper", "random_valued"))
    p.add_argument("--sigma", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--r2", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--tau", type=int, choices=(1, 2), help="fidelity exponent; must match the noise kind")
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=("auto", "cp", "surrogate", "l1tv", "ssn"))
    p.add_argument("--max-iters", type=int, dest="max_iterations")
    p.add_argument("--tol", type=float)
    p.add_argument("--cp-steps", type=float, nargs=2, metavar=("TAU", "SIGMA"))
    p.add_argument("--gamma", type=float, dest="l1_gamma")
    p.add_argument("--delta-factor", type=float, dest="surrogate_delta_factor")
    p.add_argument("--out-dir", help=f"output directory (default: ${OUTPUT_ENV}/<config hash>)")
    p.add_argument("--bits", type=int, choices=(8, 16))


def _blur(p):
    p.add_argument("--blur-size", type=int, default=5)
    p.add_argument("--blur-std", type=float, default=10.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="tvselect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb in ("denoise", "deblur"):
        p = sub.add_parser(verb, help=f"{verb} with a fixed or automatically selected weight")
        _common(p)
        if verb == "deblur":
            _blur(p)
        p.add_argument("--method", choices=("fixed", "cps", "aps", "paps", "latv", "platv"))
        p.add_argument("--alpha", type=float, help="weight for --method fixed")
        p.add_argument("--alpha0", type=float)

    p = sub.add_parser("select-scalar", help="scalar weight selection (CPS, APS, pAPS)")
    _common(p)
    _blur(p)
    p.add_argument("--blur", action="store_true", help="observe through a Gaussian blur")
    p.add_argument("--method", choices=("cps", "aps", "paps"))
    p.add_argument("--alpha0", type=float)
    p.add_argument("--p0", type=float)
    p.add_argument("--trace-csv", help="also write the trace CSV to this path")

    p = sub.add_parser("select-local", help="spatially varying weight selection (LATV, pLATV)")
    _common(p)
    _blur(p)
    p.add_argument("--blur", action="store_true", help="observe through a Gaussian blur")
    p.add_argument("--method", choices=("latv", "platv"))
    p.add_argument("--window", type=int)
    p.add_argument("--boundary", choices=("clip", "mirror"))
    p.add_argument("--alpha0", type=float)
    p.add_argument("--p0", type=float)
    p.add_argument("--auto-alpha0", action="store_true", default=None)
    p.add_argument("--trace-csv", help="also write the trace CSV to this path")

    p = sub.add_parser("synth", help="write a synthetic test image")
    p.add_argument("--name", default="phantom", choices=sorted(SYNTHETIC))
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--bits", type=int, choices=(8, 16), default=8)
    p.add_argument("out", help="output .png or .pgm path")

    p = sub.add_parser("run-table", help="sweep the configuration matrix of a results table")
    p.add_argument("--table", type=int, required=True, choices=range(1, 7))
    p.add_argument("--images", nargs="+", help="image names (synthetic or files in the corpus directory)")
    p.add_argument("--corpus", help="directory holding <name>.png or <name>.pgm files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("out", help="output CSV path")
    return parser


def _noise(args, base):
    noise = dict(base)
    if args.noise and args.noise != noise.get("kind"):
        noise = {"kind": args.noise}
    for key in ("sigma", "r1", "r2", "r"):
        v = getattr(args, key)
        if v is not None:
            noise[key] = v
    kind = noise.get("kind", "gaussian")
    if kind == "gaussian":
        noise.setdefault("sigma", 0.1)
    elif kind == "salt_pepper":
        noise.setdefault("r1", 0.1)
        noise.setdefault("r2", noise["r1"])
    else:
        noise.setdefault("r", 0.1)
    if args.tau is not None and args.tau != (2 if kind == "gaussian" else 1):
        raise ValueError(f"--tau {args.tau} does not match {kind} noise")
    return noise


def config_from_args(args):
    d = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            d = json.load(fh)
    for key in ("image", "size", "degraded", "seed", "solver", "out_dir", "bits"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    d["noise"] = _noise(args, d.get("noise", {"kind": "gaussian", "sigma": 0.1}))
    solver_cfg = dict(d.get("solver_cfg", {}))
    for key in ("max_iterations", "tol", "l1_gamma", "surrogate_delta_factor"):
        v = getattr(args, key, None)
        if v is not None:
            solver_cfg[key] = v
    if args.cp_steps:
        solver_cfg["cp_primal_step"], solver_cfg["cp_dual_step"] = args.cp_steps
    d["solver_cfg"] = solver_cfg

    verb = args.verb
    if verb == "deblur" or getattr(args, "blur", False):
        d["operator"] = {"kind": "gaussian", "size": args.blur_size, "std": args.blur_std}
    elif verb == "denoise":
        d["operator"] = None
    if getattr(args, "method", None):
        d["method"] = args.method
    elif verb in ("denoise", "deblur"):
        d.setdefault("method", "fixed" if args.alpha is not None else "paps")
    elif verb == "select-scalar":
        d.setdefault("method", "paps")
    elif verb == "select-local":
        d.setdefault("method", "platv")
    scalar_side = verb == "select-scalar" or d["method"] in ("cps", "aps", "paps")
    if verb == "select-scalar" and d["method"] not in ("cps", "aps", "paps"):
        raise ValueError(f"select-scalar cannot run method {d['method']!r}")
    if verb == "select-local" and d["method"] not in ("latv", "platv"):
        raise ValueError(f"select-local cannot run method {d['method']!r}")

    select = dict(d.get("select", {}))
    if getattr(args, "alpha0", None) is not None:
        select["alpha0"] = args.alpha0
    if getattr(args, "p0", None) is not None:
        select["p0"] = args.p0
    if select:
        d["select"] = select
    if getattr(args, "alpha", None) is not None:
        d["alpha"] = args.alpha
    if not scalar_side:
        window = dict(d.get("window", {}))
        if getattr(args, "window", None) is not None:
            window["omega"] = args.window
        if getattr(args, "boundary", None) is not None:
            window["boundary"] = args.boundary
        if window:
            d["window"] = window
        if getattr(args, "auto_alpha0", None):
            d["auto_alpha0"] = True
    return ExperimentConfig.from_dict(d)


def _report(rec):
    out = {
        "config_hash": rec.config_hash,
        "quality": rec.quality,
        "alpha": rec.alpha,
        "termination": rec.trace["termination"],
        "iterations": rec.trace["iterations"],
        "solves": rec.solves,
        "seconds": round(rec.wall_time, 3),
        "outputs": rec.outputs,
    }
    print(json.dumps(out, indent=2))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "synth":
            save_image(named_image(args.name, args.size), args.out, bits=args.bits)
            print(args.out)
            return 0
        if args.verb == "run-table":
            rows, missing = run_table(args.table, args.out, args.images, args.corpus, args.seed, args.size, args.jobs)
            if missing:
                print(f"skipped missing corpus images: {', '.join(missing)}", file=sys.stderr)
            print(f"{len(rows)} rows written to {args.out}")
            return 0
        cfg = config_from_args(args)
        rec = run_experiment(cfg)
        trace_csv = getattr(args, "trace_csv", None)
        if trace_csv:
            atomic_write_bytes(trace_csv, rec.selection.to_csv().encode())
        _report(rec)
        return 0
    except Exception as exc:
        code = error_exit_code(exc)
        if code is None:
            raise
        print(f"tvselect {args.verb}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
