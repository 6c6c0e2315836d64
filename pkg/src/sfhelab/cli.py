"""Command-line entry point.

    sfhelab [--seed N] [--threads N] [--out PATH] [--format csv|binary] COMMAND ...

Commands: moments, metrics, sample, bounds, experiment run CONFIG,
experiment report RESULTS.  Exit status is 0 on success, 2 on a usage or
configuration error and 3 when a numerical guarantee cannot be met.
"""

import argparse
import csv
import os
import sys

from .errors import ConfigError, NumericalContractError
from .model import ModelParams, constants, psi, variance_law
from .rng import check_seed

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _globals(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(None), help="64-bit seed (default: config value or 0)")
    parser.add_argument("--threads", type=int, default=d(None), help="worker threads for replicates")
    parser.add_argument("--out", default=d(None), help="output file or directory (default: stdout)")
    parser.add_argument("--format", choices=("csv", "binary"), default=d("csv"), help="sample output format")


def _model(parser):
    parser.add_argument("--alpha", type=float, required=True)
    parser.add_argument("--hurst", type=float, required=True)


def build_parser():
    ap = argparse.ArgumentParser(prog="sfhelab", description=__doc__.split("\n\n")[0])
    _globals(ap, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("moments", parents=[common], help="closed-form constants and variance")
    _model(m)
    m.add_argument("--t", type=float, default=1.0)
    m.add_argument("--L", type=float, default=None, help="also print Psi(t, L)")

    me = sub.add_parser("metrics", parents=[common], help="canonical metrics and correlations")
    _model(me)
    me.add_argument("--kind", choices=("d1", "d2", "d3", "d4", "rho1", "rho2", "rho3"), required=True)
    me.add_argument("--t", type=float, required=True)
    me.add_argument("--x", type=float, default=0.0)
    me.add_argument("--s", type=float, default=None, help="second time (d1; defaults to t)")
    me.add_argument("--y", type=float, default=0.0)
    me.add_argument("--h", type=float, default=None)
    me.add_argument("--tau", type=float, default=None)

    s = sub.add_parser("sample", parents=[common], help="sample the field on a grid")
    _model(s)
    s.add_argument("--method", choices=("spectral", "cholesky"), default="spectral")
    s.add_argument("--t0", type=float, default=1.0)
    s.add_argument("--dt", type=float, default=0.0)
    s.add_argument("--nt", type=int, default=1)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--dx", type=float, default=0.125)
    s.add_argument("--nx", type=int, default=64)
    s.add_argument("--replicates", type=int, default=1)

    b = sub.add_parser("bounds", parents=[common], help="chaining and Sudakov bounds")
    _model(b)
    b.add_argument("--T", type=float, default=1.0, help="time horizon (or fixed time for fixed-time laws)")
    b.add_argument("--L", type=float, required=True)
    b.add_argument("--law", choices=("d1", "d1space", "d2", "d3"), default="d1")
    b.add_argument("--h", type=float, default=None)
    b.add_argument("--tau", type=float, default=None)
    b.add_argument("--theta", type=float, default=0.0)

    e = sub.add_parser("experiment", parents=[common], help="Monte Carlo experiments")
    esub = e.add_subparsers(dest="action", required=True)
    r = esub.add_parser("run", parents=[common], help="run the experiment described by a config file")
    r.add_argument("config")
    r.add_argument("--replicates", type=int, default=None, help="override the config replicate count")
    rep = esub.add_parser("report", parents=[common], help="print the summary of a results directory")
    rep.add_argument("results")
    return ap


def _emit_rows(out, header, rows):
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    finally:
        if out:
            fh.close()


def _params(args):
    try:
        return ModelParams(args.alpha, args.hurst)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_moments(args):
    p = _params(args)
    c = constants(p)
    rows = [("c1H", c.c1H), ("c21", c.c21), ("kappa", c.kappa), ("gamma", c.gamma_exp),
            ("variance", variance_law(p, args.t))]
    if args.L is not None:
        rows.append(("psi", psi(p, args.t, args.L)))
    _emit_rows(args.out, ("name", "value"), rows)


def cmd_metrics(args):
    from .metrics import SpacetimePoint, correlation, d1, d2, d3, d4
    p = _params(args)
    k = args.kind
    try:
        if k == "d1":
            s = args.t if args.s is None else args.s
            rep = d1(p, SpacetimePoint(args.t, args.x), SpacetimePoint(s, args.y))
        elif k == "d2":
            rep = d2(p, args.t, _need(args.h, "--h"), args.x, args.y)
        elif k == "d3":
            rep = d3(p, args.t, _need(args.tau, "--tau"), args.x, args.y)
        elif k == "d4":
            rep = d4(p, args.t, args.x, args.y)
        else:
            aux = {"rho1": None, "rho2": args.h, "rho3": args.tau}[k]
            rep = correlation(k, p, args.t, abs(args.y - args.x), aux)
    except NumericalContractError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _emit_rows(args.out, ("kind", "value", "error"), [(rep.kind, rep.value, rep.error)])


def _need(v, flag):
    if v is None:
        raise ConfigError(f"{flag} is required for this metric")
    return v


def cmd_sample(args):
    from .sampler import SpacetimeGrid, sample_cholesky, sample_spectral_grid, write_binary, write_csv
    p = _params(args)
    if args.replicates < 1:
        raise ConfigError("--replicates must be >= 1")
    seed = 0 if args.seed is None else args.seed
    try:
        grid = SpacetimeGrid(args.t0, args.dt, args.nt, args.x0, args.dx, args.nx)
    except NumericalContractError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.method == "spectral":
        samples = list(sample_spectral_grid(p, grid, seed, args.replicates))
    else:
        samples = [s.__class__(s.values.reshape(grid.nt, grid.nx), s.seed, s.method, s.replicate, grid)
                   for s in sample_cholesky(p, grid.points(), seed, args.replicates)]
    if args.format == "binary":
        if not args.out:
            raise ConfigError("--format binary needs --out")
        stem, ext = os.path.splitext(args.out)
        for s in samples:
            path = args.out if len(samples) == 1 else f"{stem}_{s.replicate:04d}{ext or '.bin'}"
            write_binary(s, path)
    else:
        write_csv(samples, args.out or sys.stdout)


def cmd_bounds(args):
    from .bounds import DyadicPartitionScheme, chaining_upper_bound, sudakov_lower_bound
    p = _params(args)
    try:
        scheme = DyadicPartitionScheme(args.T, args.L)
        rep = chaining_upper_bound(p, scheme, args.law, t=args.T, h=args.h, tau=args.tau, theta=args.theta)
        kind = {"d1": "d1", "d1space": "d1", "d2": "d2", "d3": "d3"}[args.law]
        aux = args.h if kind == "d2" else args.tau
        sud = sudakov_lower_bound(p, args.T, args.L, kind, aux=aux)
    except NumericalContractError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [("level", n, d, term) for n, d, term in rep.per_level]
    rows.append(("chaining_total", rep.cut_index, rep.psi, rep.total))
    rows.append(("chaining_ratio", rep.cut_index, rep.scale, rep.ratio))
    rows.append(("sudakov", sud.count, sud.delta, sud.value))
    rows.append(("sudakov_psi_form", sud.count, sud.pairwise_min, sud.psi_form))
    _emit_rows(args.out, ("row", "n", "diameter_or_scale", "value"), rows)


def cmd_experiment(args):
    from .experiments import load_config, read_summary, run_experiment
    if args.action == "report":
        summary = read_summary(args.results)
        _emit_rows(args.out, ("key", "value"), summary.items())
        return
    over = {k: v for k, v in (("seed", args.seed), ("threads", args.threads)) if v is not None}
    if args.replicates is not None:
        over["replicates"] = args.replicates
    if args.out:
        over["output"] = args.out
    cfg = load_config(args.config, over)
    if not cfg.output:
        raise ConfigError("no output directory: set [output] path or pass --out")
    run_experiment(cfg)
    print(cfg.output)


_COMMANDS = {"moments": cmd_moments, "metrics": cmd_metrics, "sample": cmd_sample, "bounds": cmd_bounds,
             "experiment": cmd_experiment}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        if args.seed is not None:
            try:
                check_seed(args.seed)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"sfhelab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalContractError as exc:
        print(f"sfhelab: numerical contract failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
