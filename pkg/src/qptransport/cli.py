"""Command-line entry point: ``python -m qptransport <command> ...``.

Exit codes: 0 success, 2 bad flags, 3 solver failure, 4 a check or
acceptance threshold was not met.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .analysis import (DEFAULT_GAMMA_WINDOW, classify_transport, conductivity, fit_localization_decay,
                       fit_small_gamma_beta, fit_transport_exponent)
from .errors import QPTransportError
from .models import (KIND_NAMES, ChainSpec, DriveSpec, fibonacci_potential, fibonacci_word_recursive,
                     potential_kind, site_potential)
from .oracle import oracle_covariance
from .solver import METHODS, PRECISIONS, SolverOptions, solve_ness
from .sweep import SweepConfig, fibonacci_sizes, read_csv, run_sweep, series

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4


class UsageError(Exception):
    pass


def _kind(args):
    if args.theta is not None and args.kind != "aah":
        raise UsageError("--theta is only valid with --kind aah")
    return potential_kind(args.kind, args.theta)


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_potential(args):
    kind = _kind(args)
    if args.L < 1:
        raise UsageError("--L must be >= 1")
    if args.check_word:
        if args.kind != "fibonacci":
            raise UsageError("--check-word applies to --kind fibonacci")
        n = 0
        while len(fibonacci_word_recursive(n)) < args.L:
            n += 1
        word = fibonacci_word_recursive(n)[: args.L]
        digits = "".join(str(d) for d in fibonacci_potential(np.arange(1, args.L + 1)))
        if word != digits:
            bad = next(i for i, (a, b) in enumerate(zip(word, digits)) if a != b) + 1
            print(f"MISMATCH at site {bad}")
            return EXIT_CHECK
        print("OK")
        return EXIT_OK
    V = site_potential(kind, args.L)
    lines = ["i,V"]
    for i, v in enumerate(V, start=1):
        val = args.lam * v
        lines.append(f"{i},{int(val)}" if args.kind == "fibonacci" and float(val).is_integer()
                     else f"{i},{float(val)!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args):
    spec = ChainSpec(args.L, args.lam, _kind(args))
    drive = DriveSpec(args.gamma, args.f1, args.fL, args.Gamma)
    opts = SolverOptions(method=args.method, precision=args.precision,
                         residual_tolerance=args.tolerance)
    sol = solve_ness(spec, drive, opts)
    kappa = conductivity(sol.current, spec.L, drive.bias) if drive.bias else float("nan")
    summary = {
        "J": sol.current, "kappa": kappa, "residual": sol.residual,
        "boundary_in": sol.boundary_in, "boundary_out": sol.boundary_out,
        "homogeneity": sol.homogeneity, "method": sol.method, "precision_bits": sol.precision_bits,
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        dens = os.path.join(args.out, "density.csv")
        with open(dens, "w") as fh:
            fh.write("i,n\n")
            for i, n in enumerate(sol.density, start=1):
                fh.write(f"{i},{n!r}\n")
        summary["density_profile"] = dens
        if args.dump_covariance:
            cpath = os.path.join(args.out, "covariance.npy")
            np.save(cpath, sol.C)
            summary["covariance"] = cpath
    for k, v in summary.items():
        print(f"{k}: {v}")
    return EXIT_OK


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_sweep(args):
    if args.config:
        cfg = SweepConfig.load(args.config)
        data = cfg.to_dict()
    else:
        if not (args.kind and args.lambdas and args.gammas):
            raise UsageError("give --config or all of --kind, --lambdas, --gammas")
        sizes = ([int(x) for x in args.sizes.split(",")] if args.sizes
                 else fibonacci_sizes(args.min_size, args.max_size))
        data = dict(model=args.kind, lambdas=_floats(args.lambdas), gammas=_floats(args.gammas),
                    sizes=sizes, theta_samples=args.theta_samples)
    if args.out:
        data["output"] = args.out
    if not data.get("output"):
        raise UsageError("an output directory is required (--out or config 'output')")
    if args.threads:
        data["workers"] = args.threads
    if args.tolerance is not None:
        data["residual_tolerance"] = args.tolerance
    if args.no_cache:
        data["use_cache"] = False
    if args.name:
        data["name"] = args.name
    cfg = SweepConfig.from_dict(data)
    records = run_sweep(cfg)
    errors = sum(1 for r in records if r.error)
    print(f"{len(records)} records written to {os.path.join(cfg.output, cfg.name + '.csv')}"
          f" ({errors} with errors)")
    return EXIT_SOLVER if errors else EXIT_OK


def cmd_fit(args):
    records = read_csv(args.csv)
    lam = args.lam
    if args.quantity == "beta":
        window = tuple(_floats(args.window)) if args.window else DEFAULT_GAMMA_WINDOW
        s = series(records, lam, None, by="Gamma", value="kappa")
        fit = fit_small_gamma_beta(s, window)
        print(json.dumps({"lambda": lam, "beta": fit.exponent, "stderr": fit.stderr,
                          "r_squared": fit.r_squared, "window": fit.window}))
        return EXIT_OK
    s = series(records, lam, args.Gamma)
    window = args.window or "last5"
    if window and "," in window:
        window = tuple(_floats(window))
    fit = fit_transport_exponent(s, window)
    expo = fit_localization_decay(s)
    cls = classify_transport(fit, expo)
    print(json.dumps({"lambda": lam, "Gamma": args.Gamma, "nu": fit.exponent, "stderr": fit.stderr,
                      "r_squared": fit.r_squared, "window": fit.window,
                      "decay_rate": expo.exponent, "decay_r_squared": expo.r_squared,
                      "class": cls.kind.value}))
    return EXIT_OK


def cmd_oracle_check(args):
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for case in range(args.cases):
        L = int(rng.integers(2, 6))
        spec = ChainSpec(L, rng.uniform(0, 2), potential_kind("aah", rng.uniform(0, 2 * np.pi)))
        drive = DriveSpec(rng.uniform(0.5, 2), rng.uniform(0, 1), rng.uniform(0, 1),
                          float(rng.choice([0.0, 0.1, 1.0])))
        ref, _ = oracle_covariance(spec, drive)
        sol = solve_ness(spec, drive, SolverOptions(residual_tolerance=args.tolerance))
        err = float(np.abs(sol.C - ref).max())
        worst = max(worst, err)
        if args.verbose:
            print(f"case {case}: L={L} Gamma={drive.Gamma} max|dC|={err:.3e}")
    ok = worst <= args.oracle_tolerance
    print(f"{'OK' if ok else 'FAIL'}: {args.cases} cases, max|C_solver - C_oracle| = {worst:.3e}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_reproduce(args):
    from .reproduce import reproduce

    out = args.out or os.path.join("reproduce", args.figure)
    summary, path = reproduce(args.figure, out, args.scale, args.threads or 1,
                              args.tolerance if args.tolerance is not None else 1e-9)
    for c in summary["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']}")
    print(f"summary written to {path}")
    return EXIT_OK if summary["all_passed"] else EXIT_CHECK


def build_parser():
    p = argparse.ArgumentParser(prog="qptransport", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def model_flags(sp, need_L=True):
        sp.add_argument("--kind", choices=KIND_NAMES, required=True)
        sp.add_argument("--L", type=int, required=need_L)
        sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
        sp.add_argument("--theta", type=float, default=None, help="AAH phase")

    sp = sub.add_parser("potential", help="print the on-site potential")
    model_flags(sp)
    sp.add_argument("--check-word", action="store_true",
                    help="compare the integer-part formula with the recursive word")
    sp.add_argument("--out", help="write the table to this file")
    sp.set_defaults(func=cmd_potential)

    sp = sub.add_parser("solve", help="steady state of a single chain")
    model_flags(sp)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--f1", type=float, default=1.0)
    sp.add_argument("--fL", type=float, default=0.0)
    sp.add_argument("--Gamma", type=float, default=0.0)
    sp.add_argument("--method", choices=METHODS, default="auto")
    sp.add_argument("--precision", choices=PRECISIONS, default="auto")
    sp.add_argument("--tolerance", type=float, default=1e-9)
    sp.add_argument("--out", help="directory for the density profile")
    sp.add_argument("--dump-covariance", action="store_true", help="also save C as .npy")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="run a parameter sweep")
    sp.add_argument("--config", help="sweep JSON config")
    sp.add_argument("--kind", choices=KIND_NAMES)
    sp.add_argument("--lambdas", help="comma-separated")
    sp.add_argument("--gammas", help="comma-separated dephasing rates")
    sp.add_argument("--sizes", help="comma-separated sizes (default: Fibonacci range)")
    sp.add_argument("--min-size", type=int, default=34)
    sp.add_argument("--max-size", type=int, default=233)
    sp.add_argument("--theta-samples", type=int, default=100)
    sp.add_argument("--name")
    sp.add_argument("--out")
    sp.add_argument("--threads", type=int)
    sp.add_argument("--tolerance", type=float)
    sp.add_argument("--no-cache", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit", help="fit exponents from a sweep CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--Gamma", type=float, default=0.0)
    sp.add_argument("--quantity", choices=("nu", "beta"), default="nu")
    sp.add_argument("--window", help="'all', 'lastN' or 'lo,hi'")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("oracle-check", help="compare the solver with the dense master equation")
    sp.add_argument("--cases", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tolerance", type=float, default=1e-9, help="solver residual tolerance")
    sp.add_argument("--oracle-tolerance", type=float, default=1e-8)
    sp.set_defaults(func=cmd_oracle_check)

    sp = sub.add_parser("reproduce", help="regenerate the data behind a figure")
    sp.add_argument("figure", choices=("fig1", "fig2", "fig3", "fig4", "fig5"))
    sp.add_argument("--scale", choices=("desk", "full"), default="desk")
    sp.add_argument("--out")
    sp.add_argument("--threads", type=int)
    sp.add_argument("--tolerance", type=float)
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.print_usage(sys.stderr)
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ValueError, TypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QPTransportError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
