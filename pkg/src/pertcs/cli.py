"""Command-line entry point: ``pertcs <subcommand> [flags]``.

Exit status is 0 on success, 2 for invalid arguments or unreadable inputs,
and 3 when a mathematical precondition fails; the diagnostic then names the
violated condition.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import _backend, bounds, experiments
from .ensembles import KINDS, EnsembleSpec, gen_matrix, gen_perturbation, make_rng
from .errors import PreconditionError
from .io import atomic_write_text, format_matrix, read_matrix, read_vector, write_matrix
from .model import PerturbationBudget, head_tail_split
from .solvers import BpOptions, solve_bp, solve_bp_reference, solve_bp_then_refit, solve_oracle_ls
from .spectral import DEFAULT_BUDGET, ric

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PRECONDITION = 3


class UsageError(Exception):
    pass


def _clean(v):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats -> null."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _flat_csv(d):
    # one header line and one value line; nested values are flattened with dots
    flat = {}

    def walk(prefix, v):
        if isinstance(v, dict):
            for k, x in v.items():
                walk(f"{prefix}.{k}" if prefix else k, x)
        elif isinstance(v, list):
            flat[prefix] = ";".join("" if x is None else repr(x) if isinstance(x, float) else str(x)
                                    for x in v)
        elif isinstance(v, float):
            flat[prefix] = repr(v)
        else:
            flat[prefix] = "" if v is None else str(v).lower() if isinstance(v, bool) else str(v)

    walk("", d)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(flat.keys())
    w.writerow(flat.values())
    return buf.getvalue()


def _render(report, fmt):
    report = _clean(report)
    if fmt == "csv":
        return _flat_csv(report)
    return json.dumps(report, indent=2) + "\n"


def _emit(text, args):
    if args.output:
        atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)


def _float_list(s):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _int_list(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _unit(s):
    v = float(s)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError(f"{s} is outside [0, 1)")
    return v


def _nonneg(s):
    v = float(s)
    if not v >= 0.0:
        raise argparse.ArgumentTypeError(f"{s} is negative")
    return v


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{s} is not a positive integer")
    return v


def _load_matrix(path):
    try:
        return read_matrix(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read matrix {path}: {exc}") from None


def _load_vector(path):
    try:
        return read_vector(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read vector {path}: {exc}") from None


def cmd_gen_matrix(args):
    if args.perturb_of:
        A = _load_matrix(args.perturb_of)
        # the shape comes from the matrix; explicit --m/--n must agree with it
        for flag, given, actual in (("--m", args.m, A.shape[0]), ("--n", args.n, A.shape[1])):
            if given is not None and given != actual:
                raise UsageError(f"{flag} {given} does not match --perturb-of shape {A.shape}")
        spec = EnsembleSpec(args.ensemble, *A.shape, scale=args.scale, seed=args.seed)
        M = gen_perturbation(spec, A, args.eps_a, make_rng(args.seed, "cli", "perturbation"))
    else:
        if args.m is None or args.n is None:
            raise UsageError("--m and --n are required unless --perturb-of is given")
        spec = EnsembleSpec(args.ensemble, args.m, args.n, scale=args.scale, seed=args.seed)
        M = gen_matrix(spec, make_rng(args.seed, "cli", "matrix"))
    if args.output:
        write_matrix(args.output, M, ensemble=args.ensemble, seed=args.seed, scale=spec.variance)
    else:
        sys.stdout.write(format_matrix(M))


def cmd_ric(args):
    M = _load_matrix(args.matrix)
    if not 1 <= args.k <= M.shape[1]:
        raise UsageError(f"--k {args.k} outside [1, {M.shape[1]}]")
    rep = ric(M, args.k, args.budget, seed=args.seed)
    d = rep.as_dict()
    d["argmin_nonzero_support"] = (
        None if rep.argmin_nonzero_support is None else list(rep.argmin_nonzero_support)
    )
    _emit(_render(d, args.format), args)


def cmd_bounds(args):
    budget = PerturbationBudget.assumed(
        eps_A=args.eps_a, eps_A_K=args.eps_a_k, eps_A_2K=args.eps_a_2k, eps_b=args.eps_b, K=args.k,
    )
    cond = None
    if args.matrix:
        if args.k is None:
            raise UsageError("--matrix requires --k")
        A = _load_matrix(args.matrix)
        cond = bounds.MatrixConditioning.from_matrix(
            A, args.k, args.budget, allow_sampled=args.allow_sampled
        )
        delta_2K = cond.delta_2K if args.delta_2k is None else args.delta_2k
    else:
        if args.delta_2k is None:
            raise UsageError("give --delta-2k or --matrix")
        delta_2K = args.delta_2k
        if args.delta_k is not None:
            cond = bounds.MatrixConditioning(
                args.delta_k, delta_2K,
                args.spectral_norm_a if args.spectral_norm_a is not None else 1.0,
            )
    split = None
    norm_b = args.norm_b
    if args.signal:
        if args.k is None:
            raise UsageError("--signal requires --k")
        x = _load_vector(args.signal)
        split = head_tail_split(x, args.k)
        if norm_b is None and args.matrix:
            norm_b = float(np.linalg.norm(A @ x))
    elif args.k is not None and args.sparse:
        split = head_tail_split(np.ones(args.k), args.k)

    sc = bounds.evaluate(budget, delta_2K=delta_2K, cond=cond, split=split, norm_b=norm_b)
    report = {
        "inputs": {
            "delta_2K": delta_2K,
            "budget": budget.as_dict(),
            "conditioning": None if cond is None else cond.as_dict(),
            "r_K": None if split is None else split.r_K,
            "s_K": None if split is None else split.s_K,
            "norm_b": norm_b,
        },
        **sc.as_dict(),
        "condition1": {"holds": sc.cond1_ok, "margin": sc.cond1_margin,
                       "statement": bounds.COND1},
        "condition2": {"holds": sc.cond2_ok, "margin": sc.cond2_margin,
                       "statement": bounds.COND2},
    }
    _emit(_render(report, args.format), args)
    if not sc.cond1_ok:
        raise PreconditionError("constants C0, C1 are undefined", condition=bounds.COND1)
    if sc.cond2_ok is False:
        raise PreconditionError("total noise parameter is undefined", condition=bounds.COND2)


def _bp_opts(args):
    return BpOptions(max_iter=args.max_iter)


def cmd_solve_bp(args):
    A = _load_matrix(args.matrix)
    b = _load_vector(args.vector)
    if A.shape[0] != b.size:
        raise UsageError(f"matrix has {A.shape[0]} rows but vector has {b.size} entries")
    if args.reference:
        sol = solve_bp_reference(A, b, args.eps)
    else:
        sol = solve_bp(A, b, args.eps, _bp_opts(args))
    _emit(_render(sol.as_dict(), args.format), args)


def cmd_solve_ls(args):
    A = _load_matrix(args.matrix)
    b = _load_vector(args.vector)
    if A.shape[0] != b.size:
        raise UsageError(f"matrix has {A.shape[0]} rows but vector has {b.size} entries")
    if (args.support is None) == (args.k is None):
        raise UsageError("give exactly one of --support and --k")
    if args.support is not None:
        sol = solve_oracle_ls(A, b, args.support)
    else:
        sol = solve_bp_then_refit(A, b, args.eps, args.k, _bp_opts(args))
    _emit(_render(sol.as_dict(), args.format), args)


def _radius_policy(s):
    if s in (experiments.ORACLE, experiments.THEOREM):
        return s, None
    if s.startswith(experiments.FIXED):
        _, _, v = s.partition(":")
        try:
            return experiments.FIXED, _nonneg(v)
        except (ValueError, argparse.ArgumentTypeError):
            pass
    raise argparse.ArgumentTypeError("radius policy must be oracle, theorem or fixed:<value>")


def sweep_config(args):
    if args.config:
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(d, dict):
            raise UsageError("config file must hold a JSON object")
    else:
        d = {}
    inline = {
        "m": args.m, "n": args.n, "K_list": args.k_list, "eps_A_list": args.eps_a_list,
        "trials": args.trials, "eps_b": args.eps_b, "ensemble": args.ensemble,
        "max_iter": args.max_iter_sweep,
    }
    d.update({k: v for k, v in inline.items() if v is not None})
    if args.seed_given or "master_seed" not in d:
        d["master_seed"] = args.seed
    if args.radius_policy is not None:
        d["radius_policy"], d["radius_value"] = args.radius_policy
    if args.allow_sampled:
        d["theorem_allow_sampled"] = True
    missing = [k for k in ("m", "n", "K_list", "eps_A_list") if k not in d]
    if missing:
        raise UsageError(f"simulate needs {', '.join(missing)} (inline or via --config)")
    try:
        return experiments.SweepConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid sweep configuration: {exc}") from None


def _aggregates_path(output):
    p = Path(output)
    return p.with_name(p.stem + ".aggregates.csv")


def cmd_simulate(args):
    config = sweep_config(args)
    workers = args.workers if args.workers is not None else experiments.default_workers()
    if not args.quiet:
        print(json.dumps({"sweep": config.as_dict(), "workers": workers}, sort_keys=True),
              file=sys.stderr)
    result = experiments.run_sweep(config, workers)
    if args.format == "json":
        text = _render({
            "config": config.as_dict(),
            "rows": [asdict(r) for r in result.rows],
            "aggregates": [asdict(a) for a in result.aggregates],
        }, "json")
        _emit(text, args)
    else:
        _emit(experiments.results_csv(result), args)
        if args.output:
            atomic_write_text(_aggregates_path(args.output), experiments.aggregates_csv(result))
    if args.bounds_report:
        rep = experiments.bound_comparison_report(result)
        atomic_write_text(args.bounds_report, _render(rep.as_dict(), "json"))
    bad = len(result.rows) - result.converged_count
    if bad and not args.quiet:
        print(f"warning: {bad} of {len(result.rows)} solves did not converge", file=sys.stderr)


def cmd_report(args):
    try:
        text = Path(args.input).read_text()
        aggs = experiments.read_aggregates(text)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read aggregates {args.input}: {exc}") from None
    if args.format == "json":
        out = {
            "stat": args.stat,
            "series": {
                repr(e): [[a.K, getattr(a, args.stat)] for a in aggs if a.eps_A == e]
                for e in sorted({a.eps_A for a in aggs})
            },
        }
        _emit(_render(out, "json"), args)
    else:
        _emit(experiments.plot_data(aggs, args.stat), args)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--quiet", "-q", action="store_true",
                        help="do not print the resolved configuration")

    p = argparse.ArgumentParser(prog="pertcs", description="Perturbed compressed sensing toolkit.")
    sub = p.add_subparsers(dest="command", required=True, metavar="<command>")

    g = sub.add_parser("gen-matrix", parents=[common], help="draw a random matrix")
    g.add_argument("--ensemble", choices=KINDS, default="gaussian")
    g.add_argument("--m", type=_positive_int, default=None)
    g.add_argument("--n", type=_positive_int, default=None)
    g.add_argument("--scale", type=float, default=None, help="entry variance (default 1/m)")
    g.add_argument("--perturb-of", default=None,
                   help="draw a perturbation of this matrix instead, rescaled to --eps-a")
    g.add_argument("--eps-a", type=_unit, default=0.05)
    g.set_defaults(func=cmd_gen_matrix, default_format="csv")

    r = sub.add_parser("ric", parents=[common], help="restricted isometry constant")
    r.add_argument("--matrix", required=True)
    r.add_argument("--k", type=_positive_int, required=True)
    r.add_argument("--budget", type=_positive_int, default=DEFAULT_BUDGET,
                   help="max submatrices to enumerate before sampling")
    r.set_defaults(func=cmd_ric, default_format="json")

    b = sub.add_parser("bounds", parents=[common], help="stability constants and conditions")
    b.add_argument("--delta-2k", type=_unit, default=None)
    b.add_argument("--delta-k", type=_unit, default=None)
    b.add_argument("--spectral-norm-a", type=_nonneg, default=None)
    b.add_argument("--matrix", default=None, help="compute RICs of this matrix exactly")
    b.add_argument("--budget", type=_positive_int, default=DEFAULT_BUDGET)
    b.add_argument("--allow-sampled", action="store_true",
                   help="accept sampled (lower-bound) RICs for large matrices")
    b.add_argument("--eps-a", type=_unit, default=0.0)
    b.add_argument("--eps-a-k", type=_unit, default=None)
    b.add_argument("--eps-a-2k", type=_unit, default=None)
    b.add_argument("--eps-b", type=_unit, default=0.0)
    b.add_argument("--k", type=_positive_int, default=None)
    b.add_argument("--signal", default=None, help="signal x (vector CSV) for r_K, s_K")
    b.add_argument("--sparse", action="store_true", help="assume x is K-sparse")
    b.add_argument("--norm-b", type=_nonneg, default=None)
    b.set_defaults(func=cmd_bounds, default_format="json")

    for name, func, helptext in (
        ("solve-bp", cmd_solve_bp, "Basis Pursuit with a residual ball"),
        ("solve-ls", cmd_solve_ls, "least squares on a known or BP-estimated support"),
    ):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--matrix", required=True, help="decoding matrix A_hat")
        s.add_argument("--vector", required=True, help="observation b_hat")
        s.add_argument("--eps", type=_nonneg, default=0.0, help="residual radius")
        s.add_argument("--max-iter", type=_positive_int, default=50_000)
        if name == "solve-bp":
            s.add_argument("--reference", action="store_true",
                           help="use the interior-point / simplex reference solver")
        else:
            s.add_argument("--support", type=_int_list, default=None,
                           help="comma-separated 0-based column indices")
            s.add_argument("--k", type=_positive_int, default=None,
                           help="estimate a K-term support with BP, then refit")
        s.set_defaults(func=func, default_format="json")

    m = sub.add_parser("simulate", parents=[common], help="Monte-Carlo recovery sweep")
    m.add_argument("--config", default=None, help="JSON sweep configuration")
    m.add_argument("--m", type=_positive_int, default=None)
    m.add_argument("--n", type=_positive_int, default=None)
    m.add_argument("--k-list", type=_int_list, default=None)
    m.add_argument("--eps-a-list", type=_float_list, default=None)
    m.add_argument("--eps-b", type=_unit, default=None)
    m.add_argument("--trials", type=_positive_int, default=None)
    m.add_argument("--ensemble", choices=KINDS, default=None)
    m.add_argument("--radius-policy", type=_radius_policy, default=None,
                   help="oracle | theorem | fixed:<value>")
    m.add_argument("--allow-sampled", action="store_true",
                   help="let the theorem radius use sampled RICs")
    m.add_argument("--max-iter", dest="max_iter_sweep", type=_positive_int, default=None)
    m.add_argument("--workers", type=_positive_int, default=None,
                   help="worker processes (default: CS_TOOLKIT_THREADS or core count)")
    m.add_argument("--bounds-report", default=None,
                   help="also write a bound-versus-error JSON report here")
    m.set_defaults(func=cmd_simulate, default_format="csv")

    rp = sub.add_parser("report", parents=[common], help="plot data from an aggregates CSV")
    rp.add_argument("--input", required=True)
    rp.add_argument("--stat", choices=("mean", "median", "std"), default="mean")
    rp.set_defaults(func=cmd_report, default_format="csv")
    return p


def _resolved(args):
    skip = {"func", "default_format", "seed_given"}
    d = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    d["backend"] = _backend.BACKEND
    return d


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    if args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    if args.format is None:
        args.format = args.default_format
    if not args.quiet and args.command != "simulate":
        print(json.dumps(_clean(_resolved(args)), sort_keys=True), file=sys.stderr)
    try:
        args.func(args)
    except PreconditionError as exc:
        print(f"error: precondition violated: {exc.condition}\n  {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
