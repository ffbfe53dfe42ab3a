"""Command line interface: ``gradpapa {synth,decompose,eval,check}``.

Exit codes: 0 success, 1 negative answer from ``check``, 2 usage or I/O
error, 3 numerical abort.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import io
from .datagen import add_noise, generate_synthetic
from .exceptions import DegenerateInputError, InvalidDimsError, NumericalError
from .initialization import RNG_NAME, init_abundances, random_init, spa_endmembers
from .metrics import lr_feasibility, mse_factor, sto_feasibility
from .model import ModelDims, check_identifiability
from .projections import ExactRank, NuclearBall, project_feasible_set
from .solver import SolverConfig, run

OUT_DIR_ENV = "GRADPAPA_OUT_DIR"
EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

C_FILE = "C.ll1f"
S_FILE = "S.ll1f"
CLEAN_CUBE = "cube_clean.ll1c"
NOISY_CUBE = "cube_noisy.ll1c"


class UsageError(Exception):
    pass


def _default_out():
    return os.environ.get(OUT_DIR_ENV, "gradpapa_out")


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from exc


def cmd_synth(args):
    try:
        dims = ModelDims(args.i, args.j, args.k, args.l, args.r)
    except InvalidDimsError as exc:
        raise UsageError(str(exc)) from exc
    _ensure_dir(args.out)
    C, S, Y = generate_synthetic(dims.I, dims.J, dims.K, dims.L, dims.R, args.seed)
    shape = (dims.I, dims.J)
    io.write_factor(os.path.join(args.out, C_FILE), C, io.ENDMEMBERS)
    io.write_factor(os.path.join(args.out, S_FILE), S, io.ABUNDANCES, shape)
    io.write_cube(os.path.join(args.out, CLEAN_CUBE), Y, shape)
    if args.snr is not None:
        # noise stream is kept separate from the factor stream
        Yn = add_noise(Y, args.snr, [args.seed, 1])
        io.write_cube(os.path.join(args.out, NOISY_CUBE), Yn, shape)
    io.write_json(
        os.path.join(args.out, "manifest.json"),
        {
            "i": dims.I, "j": dims.J, "k": dims.K, "l": dims.L, "r": dims.R,
            "snr": args.snr, "seed": args.seed, "rng": RNG_NAME,
            "files": {
                "endmembers": C_FILE,
                "abundances": S_FILE,
                "clean_cube": CLEAN_CUBE,
                "noisy_cube": NOISY_CUBE if args.snr is not None else None,
            },
        },
    )
    return EXIT_OK


_INLINE_KEYS = (
    "r", "mode", "l", "l_tilde", "theta", "q", "eps", "init", "seed",
    "max_iters", "obj_tol", "ap_max_iters", "ap_tol", "extrapolation",
)


def _decompose_settings(args):
    try:
        cfg = io.load_config(args.config if args.config else {})
        overrides = {k: getattr(args, k) for k in _INLINE_KEYS if getattr(args, k) is not None}
        cfg = io.load_config({**{k: v for k, v in cfg.items()}, **overrides})
    except (OSError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc
    if cfg["r"] is None:
        raise UsageError("the number of endmembers is required (--r or config key 'r')")
    return cfg


def cmd_decompose(args):
    cfg = _decompose_settings(args)
    try:
        Y, shape = io.read_cube(args.input)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read cube: {exc}") from exc
    if not np.all(np.isfinite(Y)):
        raise UsageError("cube contains non-finite values")
    K = Y.shape[0]
    I, J = shape
    R = int(cfg["r"])
    L = cfg["l"]
    if cfg["mode"] == "lr":
        if L is None:
            raise UsageError("mode 'lr' needs the map rank (--l)")
        mode = ExactRank(int(L))
    else:
        radius = cfg["l_tilde"] if cfg["l_tilde"] is not None else 1.5 * max(I, J, K)
        mode = NuclearBall(float(radius))
    identifiability = None
    if L is not None:
        try:
            rep = check_identifiability(ModelDims(I, J, K, int(L), R))
        except InvalidDimsError as exc:
            raise UsageError(str(exc)) from exc
        identifiability = {"satisfied": rep.satisfied, "size_margin": rep.size_margin,
                           "kruskal_margin": rep.kruskal_margin}
        if not rep.satisfied:
            print("warning: uniqueness condition not met for these dimensions",
                  file=sys.stderr)
    try:
        config = SolverConfig(
            mode=mode, theta=cfg["theta"], q=cfg["q"], eps=cfg["eps"],
            max_iters=cfg["max_iters"], obj_tol=cfg["obj_tol"],
            max_ap_iters=cfg["ap_max_iters"], ap_tol=cfg["ap_tol"],
            extrapolation=cfg["extrapolation"], seed=cfg["seed"],
            report_rank=None if L is None else int(L),
        )
        if np.ndim(cfg["theta"]) == 1 and len(cfg["theta"]) != R:
            raise ValueError(f"theta must have {R} entries")
    except ValueError as exc:
        raise UsageError(f"bad configuration: {exc}") from exc

    ap_args = (config.max_ap_iters, config.ap_tol)
    try:
        if args.init_c:
            C0, kind, _ = io.read_factor(args.init_c)
            if kind != io.ENDMEMBERS or C0.shape != (K, R):
                raise UsageError(f"initial endmembers must be a {K}x{R} endmember file")
            if args.init_s:
                S0, kind, s_shape = io.read_factor(args.init_s)
                if kind != io.ABUNDANCES or s_shape != shape or S0.shape[0] != R:
                    raise UsageError("initial abundances do not match the cube")
                S0 = project_feasible_set(S0, mode, shape, *ap_args).projected
            else:
                S0 = init_abundances(Y, C0, mode, shape, *ap_args)
        elif cfg["init"] == "spa":
            C0 = spa_endmembers(Y, R)
            S0 = init_abundances(Y, C0, mode, shape, *ap_args)
        else:
            C0, S0 = random_init(K, R, shape, mode, cfg["seed"], *ap_args)
    except (OSError, io.FileFormatError, DegenerateInputError) as exc:
        raise UsageError(f"initialization failed: {exc}") from exc

    _ensure_dir(args.out)
    trace_path = args.trace or os.path.join(args.out, "trace.csv")
    manifest = {"config": cfg, "rng": RNG_NAME, "identifiability": identifiability,
                "i": I, "j": J, "k": K}
    try:
        C, S, trace = run(Y, C0, S0, config, shape)
    except NumericalError as exc:
        if exc.trace is not None:
            io.write_trace(trace_path, exc.trace)
        manifest.update(termination="numerical", error=str(exc),
                        iterations=0 if exc.trace is None else len(exc.trace))
        io.write_json(os.path.join(args.out, "result.json"), manifest)
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    io.write_factor(os.path.join(args.out, C_FILE), C, io.ENDMEMBERS)
    io.write_factor(os.path.join(args.out, S_FILE), S, io.ABUNDANCES, shape)
    io.write_trace(trace_path, trace)
    final = trace.records[-1]
    manifest.update(
        termination=trace.termination,
        iterations=len(trace),
        final_objective=final.objective,
        initial_objective=trace.initial_objective,
        final_rel_fit=final.rel_fit,
        trace=os.path.abspath(trace_path),
    )
    io.write_json(os.path.join(args.out, "result.json"), manifest)
    return EXIT_OK


def _rank_for_eval(args):
    if args.l is not None:
        return args.l
    for d, name, key in ((args.truth, "manifest.json", "l"), (args.est, "result.json", None)):
        path = os.path.join(d, name)
        if os.path.exists(path):
            with open(path) as fh:
                doc = json.load(fh)
            val = doc.get("l") if key else doc.get("config", {}).get("l")
            if val is not None:
                return int(val)
    return None


def cmd_eval(args):
    try:
        C_est, kc, _ = io.read_factor(os.path.join(args.est, C_FILE))
        S_est, ks, shape_est = io.read_factor(os.path.join(args.est, S_FILE))
        C_true, _, _ = io.read_factor(os.path.join(args.truth, C_FILE))
        S_true, _, shape_true = io.read_factor(os.path.join(args.truth, S_FILE))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read factors: {exc}") from exc
    if C_est.shape != C_true.shape or S_est.shape != S_true.shape or shape_est != shape_true:
        raise UsageError("estimated and true factors have different dimensions")
    L = _rank_for_eval(args)
    try:
        mc = mse_factor(C_est, C_true)
        ms = mse_factor(S_est.T, S_true.T)
    except DegenerateInputError as exc:
        raise UsageError(str(exc)) from exc
    report = {
        "mse_c": mc.value,
        "mse_s": ms.value,
        "matching_c": list(mc.matching),
        "matching_s": list(ms.matching),
        "p": args.p,
        "sto_percent": sto_feasibility(S_est, args.p),
        "l": L,
        "lr_energy_percent": None if L is None else lr_feasibility(S_est, L, shape_est),
    }
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_check(args):
    try:
        rep = check_identifiability(ModelDims(args.i, args.j, args.k, args.l, args.r))
    except InvalidDimsError as exc:
        raise UsageError(str(exc)) from exc
    print(f"satisfied: {'yes' if rep.satisfied else 'no'}")
    print(f"size margin (IJ - L^2 R): {rep.size_margin}")
    print(f"rank margin (sum of mins - (2R + 2)): {rep.kruskal_margin}")
    return EXIT_OK if rep.satisfied else EXIT_NEGATIVE


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text}")


def _theta(text):
    parts = [float(p) for p in text.split(",")]
    return parts[0] if len(parts) == 1 else parts


def _snr(text):
    val = float(text)
    if math.isnan(val):
        raise argparse.ArgumentTypeError("SNR must be a number")
    return val


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gradpapa",
        description="Hyperspectral unmixing by structured LL1 tensor decomposition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic LL1 cube with ground truth")
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--l", type=int, required=True, help="rank of each abundance map")
    p.add_argument("--r", type=int, required=True, help="number of endmembers")
    p.add_argument("--snr", type=_snr, default=None,
                   help="noise level in dB; omit for a clean cube only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None,
                   help=f"output directory (default ${OUT_DIR_ENV} or ./gradpapa_out)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "decompose",
        help="unmix a cube",
        description="Inline flags override values from --config. Defaults: mode=lr, "
                    "theta=0, q=0.5, eps=1e-3, init=spa, seed=0, max_iters=1200, "
                    "obj_tol=1e-5, ap_max_iters=50, ap_tol=1e-3, extrapolation=true, "
                    "l_tilde=1.5*max(I,J,K).",
    )
    p.add_argument("--input", required=True, help="cube file (.ll1c)")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--r", type=int, help="number of endmembers")
    p.add_argument("--mode", choices=("lr", "nn"))
    p.add_argument("--l", type=int, help="map rank (lr mode)")
    p.add_argument("--l-tilde", dest="l_tilde", type=float, help="nuclear radius (nn mode)")
    p.add_argument("--theta", type=_theta, help="TV weight, scalar or comma separated")
    p.add_argument("--q", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--init", choices=("spa", "random"))
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--obj-tol", dest="obj_tol", type=float)
    p.add_argument("--ap-max-iters", dest="ap_max_iters", type=int)
    p.add_argument("--ap-tol", dest="ap_tol", type=float)
    p.add_argument("--extrapolation", type=_bool)
    p.add_argument("--init-c", dest="init_c", help="endmember file to start from")
    p.add_argument("--init-s", dest="init_s", help="abundance file to start from")
    p.add_argument("--trace", help="trace CSV path (default OUT/trace.csv)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("eval", help="compare estimated factors with ground truth")
    p.add_argument("--est", required=True, help="directory with C.ll1f and S.ll1f")
    p.add_argument("--truth", required=True, help="directory with C.ll1f and S.ll1f")
    p.add_argument("--p", type=float, default=1e-5, help="sum-to-one tolerance")
    p.add_argument("--l", type=int, default=None,
                   help="rank for the energy metric (default: from the manifests)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="test the uniqueness condition for given sizes")
    for name in ("i", "j", "k", "l", "r"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out", "unused") is None:
        args.out = _default_out()
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
