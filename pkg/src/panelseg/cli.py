"""Command line entry point ``panelseg``.

Exit codes: 0 on success, 2 for invalid input (bad arguments, files or
configs), 3 when an estimator fails on a well-posed problem.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .cusum import cusum_statistic, write_profile_csv
from .errors import EstimatorFailure, InvalidArgument, InvalidInput, PanelSegError
from .estimation import (
    banded_covariance, convex_regression, estimated_exact_weights, natural_covariance,
)
from .experiments import emit_report, read_config, run_monte_carlo
from .gflasso import GroupFusedLasso, write_change_set, write_matrix_csv, write_path_csv
from .model import NoiseModel, read_panel_csv, read_simulation_spec, read_vector_csv, write_panel_csv, write_vector_csv
from .theory import bound_limit, boundary, consistency_bound, theory_report
from .weights import WeightScheme

EXIT_OK, EXIT_INVALID, EXIT_FAILURE = 0, 2, 3


def _covariance(Y, method, args):
    if method == "exact-est":
        return natural_covariance(Y)
    if method == "exact-banded":
        return banded_covariance(Y, args.n1, args.n2, args.h)
    if method in ("exact-banded-centered", "exact-banded,centered"):
        return banded_covariance(Y, args.n1, args.n2, args.h, centered=True)
    raise InvalidArgument(f"unknown estimation method {method!r}")


def resolve_weights(text: str, Y, args) -> np.ndarray:
    """Weight vector for a ``--weights`` value on data ``Y``.

    Accepted: ``simple``, ``standard``, ``weighted:GAMMA``,
    ``exact-file:PATH`` (a weight vector as written by ``panelseg weights``),
    ``exact-est``, ``exact-banded`` and ``exact-banded,centered``.
    """
    n = Y.shape[0]
    if text == "simple":
        return WeightScheme.simple().vector(n)
    if text == "standard":
        return WeightScheme.standard().vector(n)
    if text.startswith("weighted:"):
        try:
            gamma = float(text.split(":", 1)[1])
        except ValueError:
            raise InvalidArgument(f"bad gamma in {text!r}") from None
        return WeightScheme.weighted(gamma).vector(n)
    if text.startswith("exact-file:"):
        w = read_vector_csv(text.split(":", 1)[1])
        if w.size != n - 1:
            raise InvalidArgument(f"weight file has {w.size} entries, need n-1={n - 1}")
        return w
    est = estimated_exact_weights(_covariance(Y, text, args))
    if est.fallback_used:
        print("warning: estimated weights not positive, using standard weights", file=sys.stderr)
    return est.weights


def _cmd_simulate(args):
    spec = read_simulation_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    if args.d is not None:
        spec.d = args.d
    Y = spec.generate().values
    if args.out:
        write_panel_csv(args.out, Y, header=args.header)
    else:
        _write_stdout(Y, args.header)


def _write_stdout(Y, header):
    if header:
        print(",".join(f"panel{k + 1}" for k in range(Y.shape[1])))
    for row in Y:
        print(",".join(repr(float(v)) for v in row))


def _cmd_cusum(args):
    Y = read_panel_csv(args.data).values
    w = resolve_weights(args.weights, Y, args)
    prof = cusum_statistic(Y, w)
    if args.profile:
        write_profile_csv(args.profile, prof)
    print(prof.estimate)
    if len(prof.argmax_set) > 1:
        print(f"note: maximum attained at {list(prof.argmax_set)}", file=sys.stderr)


def _cmd_gflasso(args):
    Y = read_panel_csv(args.data).values
    w = resolve_weights(args.weights, Y, args)
    model = GroupFusedLasso(Y, w)
    if args.k_target is not None:
        res = model.segment(args.k_target)
        sol = res.solution
        if args.path:
            write_path_csv(args.path, res.path)
    else:
        sol = model.solve(args.lam)
    if args.beta:
        write_matrix_csv(args.beta, sol.beta)
    if args.fit:
        write_matrix_csv(args.fit, sol.U)
    if args.changes:
        write_change_set(args.changes, sol.change_set)
    print(",".join(str(u) for u in sol.change_set))
    print(f"lambda={sol.lam!r} kkt_residual={sol.kkt_residual:.3e}", file=sys.stderr)


def _cmd_weights(args):
    Y = read_panel_csv(args.data).values
    cov = _covariance(Y, args.method, args)
    if args.covariance:
        write_matrix_csv(args.covariance, cov.matrix)
    est = estimated_exact_weights(cov)
    fallback = est.fallback_used
    w = est.weights
    if args.convex_reg:
        reg = convex_regression(w, args.orientation)
        w, fallback = reg.weights, fallback or reg.fallback_used
    if fallback:
        print("warning: fallback to standard weights", file=sys.stderr)
    if args.out:
        write_vector_csv(args.out, w)
    else:
        for v in w:
            print(repr(float(v)))


def _cmd_theory(args):
    if args.boundary is not None:
        print(repr(boundary(args.boundary)))
        return
    if args.limit is not None:
        if args.gamma is None:
            raise InvalidArgument("--limit needs --gamma")
        print(repr(bound_limit(args.limit, args.gamma)))
        return
    if args.n is None or args.gamma is None:
        raise InvalidArgument("need --n and --gamma (with --u), or --boundary, or --limit")
    if args.u is None:
        model = NoiseModel.iid() if args.phi == 0 and args.theta == 0 else NoiseModel.ma1(args.phi, args.theta)
        sys.stdout.write(theory_report(args.n, args.gamma, model))
        return
    reg = consistency_bound(args.u, args.n, args.gamma)
    print(f"u={reg.u} n={reg.n} gamma={reg.gamma:g} u_star={reg.u_star} s={reg.s!r} bound={reg.bound!r}")


def _cmd_bench(args):
    config = read_config(args.config)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    table = run_monte_carlo(config)
    for path in emit_report(table, args.out, charts=not args.no_charts):
        print(path)


def _add_estimation_flags(p):
    p.add_argument("--n1", type=int, default=1, help="training window start (1-based)")
    p.add_argument("--n2", type=int, default=20, help="training window end (inclusive)")
    p.add_argument("--h", type=int, default=2, help="band width")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panelseg", description="Common change points in short panels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a panel CSV from a key-value spec file")
    p.add_argument("spec")
    p.add_argument("-o", "--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    weights_help = ("simple, standard, weighted:GAMMA, exact-file:PATH, exact-est, "
                    "exact-banded, exact-banded,centered")
    p = sub.add_parser("cusum", help="estimate a single change point")
    p.add_argument("data")
    p.add_argument("--weights", default="standard", help=weights_help)
    p.add_argument("--profile", help="write the (i, t(i)) profile here")
    _add_estimation_flags(p)
    p.set_defaults(func=_cmd_cusum)

    p = sub.add_parser("gflasso", help="weighted group fused LASSO")
    p.add_argument("data")
    p.add_argument("--weights", default="standard", help=weights_help)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--k-target", type=int)
    p.add_argument("--beta", help="write the jump matrix here")
    p.add_argument("--fit", help="write the fitted matrix here")
    p.add_argument("--changes", help="write the change set here")
    p.add_argument("--path", help="write the lambda search log here (with --k-target)")
    _add_estimation_flags(p)
    p.set_defaults(func=_cmd_gflasso)

    p = sub.add_parser("weights", help="estimate exact weights from data")
    p.add_argument("data")
    p.add_argument("--method", default="exact-est",
                   choices=["exact-est", "exact-banded", "exact-banded-centered", "exact-banded,centered"])
    p.add_argument("--convex-reg", action="store_true", help="post-process by convex regression")
    p.add_argument("--orientation", default="convex", choices=["convex", "concave"])
    p.add_argument("--covariance", help="write the covariance estimate here")
    p.add_argument("-o", "--out")
    _add_estimation_flags(p)
    p.set_defaults(func=_cmd_weights)

    p = sub.add_parser("theory", help="consistency bounds and boundary function")
    p.add_argument("--u", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--boundary", type=float, metavar="GAMMA")
    p.add_argument("--limit", type=float, metavar="LOCATION_FRACTION")
    p.add_argument("--phi", type=float, default=0.0, help="MA(1) phi for the report")
    p.add_argument("--theta", type=float, default=0.0, help="MA(1) theta for the report")
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("bench", help="run a Monte Carlo config file")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-charts", action="store_true")
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EstimatorFailure as exc:
        print(f"estimator failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, PanelSegError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
