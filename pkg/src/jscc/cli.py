"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .bounds import (achievability_eps, best_ziv_bound, lemma4_bound, lemma5_bound, opta_bound,
                     solve_eps_star, theorem_curve)
from .config import ConfigError, SchemeConfig, default_k, make_source
from .experiments import db_grid, fit_scaling, pilot_sigma_e, point_config, policy_eps, run_point, sweep
from .io import manifest, sweep_columns, sweep_record, to_csv, to_json, write_output

BOUND_COLUMNS = ["snr_db", "snr", "n", "eps", "beta", "opta", "lemma4", "lemma5", "ziv", "theorem_ref"]


class UsageError(Exception):
    pass


def _seed_default() -> int:
    env = os.environ.get("JSCC_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"JSCC_SEED must be an integer, got {env!r}") from None


def _range(text: str) -> list:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO:HI:STEP") from None
    try:
        grid = db_grid(lo, hi, step)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not grid:
        raise argparse.ArgumentTypeError("empty grid")
    return grid


def _window(text: str) -> tuple:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO:HI") from None
    return (lo, hi)


def _common(p: argparse.ArgumentParser, samples: bool = True) -> None:
    p.add_argument("--config", help="key=value file; explicit flags win")
    p.add_argument("--n", type=int, default=2, help="channel uses per source letter")
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None, help="power margin (default 0.1 * source variance)")
    p.add_argument("--k", type=float, default=None,
                   help="lattice-error decay constant (default 1/(8(var+delta)))")
    p.add_argument("--source", choices=["gaussian", "uniform"], default="gaussian")
    p.add_argument("--source-var", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None, help="default: $JSCC_SEED or 0")
    p.add_argument("--n-pilot", type=int, default=100_000)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", help="also write the table here, with a manifest alongside")
    p.add_argument("--workers", type=int, default=None, help="default: available CPUs")
    p.add_argument("--no-ziv", action="store_true", help="skip the numerical Ziv bound")
    if samples:
        p.add_argument("--samples", type=int, default=1_000_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jscc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one (n, snr, eps) point")
    _common(p)
    p.add_argument("--snr-db", type=float, default=40.0)
    p.add_argument("--eps", default="auto",
                   help="exponent gap: a number, 'auto' (achievability schedule) or 'optimal'")
    p.add_argument("--noise-var", type=float, default=None,
                   help="actual channel noise variance (default power/snr)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate an SNR grid and fit the scaling law")
    _common(p)
    p.add_argument("--snr-db-range", type=_range, default=_range("30:60:3"), metavar="LO:HI:STEP")
    p.add_argument("--eps-policy", choices=["fixed", "achievability", "optimal"], default="achievability")
    p.add_argument("--eps", type=float, default=None, help="exponent gap for --eps-policy fixed")
    p.add_argument("--fit-window", type=_window, default=None, metavar="LO:HI")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="evaluate every lower bound over an SNR grid")
    _common(p, samples=False)
    p.add_argument("--snr-db-range", type=_range, default=_range("30:60:3"), metavar="LO:HI:STEP")
    p.add_argument("--eps-policy", choices=["fixed", "achievability", "optimal"], default="achievability")
    p.add_argument("--eps", type=float, default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("solve-eps", help="exponent gap from the balance equation or the schedule")
    p.add_argument("--config")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--snr", type=float)
    g.add_argument("--snr-db", type=float)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=float, default=None,
                   help="constant k (optimal: exp(-snr^eps/k) form, default 8(1+0.1);"
                        " achievability: exp(-k snr^eps) form, default 1/(8(1+0.1)))")
    p.add_argument("--policy", choices=["optimal", "achievability"], default="optimal")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_eps)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    try:
        with open(args.config) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        parser.error(f"cannot read config: {exc}")
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            parser.error(f"config line is not key=value: {raw!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            parser.error(f"unknown config key {key!r}")
        act = actions[dest]
        if act.type is not None:
            try:
                defaults[dest] = act.type(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"bad value for {key}: {exc}")
        elif act.const is True:
            defaults[dest] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _seed(args) -> int:
    return args.seed if args.seed is not None else _seed_default()


def _base(args) -> tuple:
    if args.n < 2:
        raise UsageError("n must be ≥ 2")
    src = make_source(args.source, args.source_var)
    delta = args.delta if args.delta is not None else 0.1 * args.source_var
    k = args.k if args.k is not None else default_k(args.source_var, delta)
    base = SchemeConfig(n=args.n, beta=2.0, power=args.power, sigma_s2=args.source_var,
                        delta=delta, k=k)
    return base, src


def _config_dict(args) -> dict:
    out = {}
    for key, val in vars(args).items():
        if key == "func":
            continue
        out[key] = val
    return out


def _emit(args, records, columns, trailer=(), extra=None) -> None:
    if args.format == "json":
        text = to_json(records, columns)
        if trailer:
            for t in trailer:
                print(f"# {t}", file=sys.stderr)
    else:
        text = to_csv(records, columns, trailer)
    sys.stdout.write(text)
    if args.out:
        man = manifest(args.command, _config_dict(args), getattr(args, "seed", None),
                       [args.out], argv=sys.argv[1:], extra=extra)
        write_output(args.out, text, man)


def _setup(fn, *a):
    try:
        return fn(*a)
    except (ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    def build():
        base, src = _base(args)
        snr = 10.0 ** (args.snr_db / 10.0)
        if args.eps == "auto":
            eps = policy_eps("achievability", snr, base.n, base)
        elif args.eps == "optimal":
            eps = policy_eps("optimal", snr, base.n, base)
        else:
            try:
                eps = float(args.eps)
            except ValueError:
                raise UsageError("--eps must be a number, 'auto' or 'optimal'") from None
        cfg = point_config(base, snr, eps)
        if args.noise_var is not None:
            cfg = cfg.with_(noise_var=args.noise_var)
        return cfg, src

    cfg, src = _setup(build)
    args.seed = _seed(args)
    row = run_point(cfg, src, args.samples, args.seed, workers=args.workers,
                    n_pilot=args.n_pilot, with_ziv=not args.no_ziv)
    _emit(args, [sweep_record(row)], sweep_columns(cfg.n))
    return 0


def cmd_sweep(args) -> int:
    base, src = _setup(_base, args)
    if args.eps_policy == "fixed" and args.eps is None:
        raise UsageError("--eps-policy fixed needs --eps")
    args.seed = _seed(args)
    grid = args.snr_db_range
    # validate every point before any simulation starts
    for db in grid:
        snr = 10.0 ** (db / 10.0)
        _setup(lambda: point_config(base, snr, policy_eps(args.eps_policy, snr, base.n, base, args.eps)))
    rows = sweep(base, grid, args.eps_policy, args.samples, args.seed, eps=args.eps, src=src,
                 workers=args.workers, n_pilot=args.n_pilot, with_ziv=not args.no_ziv)
    window = args.fit_window or (grid[0], grid[-1])
    trailer, extra = [], {}
    try:
        raw = fit_scaling(rows, window, "raw-loglog")
        ref = fit_scaling(rows, window, "vs-theorem-curve")
    except ValueError as exc:
        trailer.append(f"fit unavailable: {exc}")
    else:
        trailer.append(
            f"fit window={window[0]:g}:{window[1]:g} points={raw.points}"
            f" raw_slope={raw.slope:.6f} raw_r2={raw.r2:.6f}"
            f" theorem_slope={ref.slope:.6f} theorem_r2={ref.r2:.6f}")
        extra = {"fit": {"raw": dataclasses.asdict(raw), "vs_theorem": dataclasses.asdict(ref)}}
    _emit(args, [sweep_record(r) for r in rows], sweep_columns(base.n), trailer, extra)
    return 0


def cmd_bounds(args) -> int:
    base, src = _setup(_base, args)
    if args.eps_policy == "fixed" and args.eps is None:
        raise UsageError("--eps-policy fixed needs --eps")
    args.seed = _seed(args)
    points = []
    for db in args.snr_db_range:
        snr = 10.0 ** (db / 10.0)
        eps = _setup(policy_eps, args.eps_policy, snr, base.n, base, args.eps)
        try:
            cfg = point_config(base, snr, eps)
        except ConfigError:
            # no scheme at this point (beta <= 1); scheme bounds are reported as NA
            cfg = None
        points.append((db, snr, eps, cfg))
    records = []
    for db, snr, eps, cfg in points:
        rec = {"snr_db": db, "snr": snr, "n": base.n, "eps": eps,
               "beta": snr ** ((1.0 - eps) / 2.0), "opta": opta_bound(snr, base.n, src),
               "lemma5": lemma5_bound(snr, base.n, eps, src, base.delta, base.sigma_s2),
               "lemma4": None, "ziv": None,
               "theorem_ref": theorem_curve(snr, base.n) if snr > 1 else None}
        if cfg is not None:
            cfg = pilot_sigma_e(cfg, src, args.seed, args.n_pilot)
            rec["lemma4"] = lemma4_bound(snr, cfg.n, eps, src, cfg.sigma_e2)
            rec["ziv"] = None if args.no_ziv else best_ziv_bound(cfg, src)
        records.append(rec)
    _emit(args, records, BOUND_COLUMNS)
    return 0


def cmd_solve_eps(args) -> int:
    snr = args.snr if args.snr is not None else 10.0 ** (args.snr_db / 10.0)
    if args.n < 2:
        raise UsageError("n must be ≥ 2")
    if args.policy == "optimal":
        if not snr > 1:
            raise UsageError("snr must exceed 1")
        k = args.k if args.k is not None else 1.0 / default_k(1.0, 0.1)
        sol = _setup(solve_eps_star, snr, args.n, k)
        cols = ["policy", "snr", "n", "k", "eps", "snr_eps", "l1", "l2", "residual", "xi", "w_arg"]
        rec = {"policy": "optimal", "snr": snr, "n": args.n, "k": k, "eps": sol.eps_star,
               "snr_eps": sol.snr_eps, "l1": sol.l1, "l2": sol.l2, "residual": sol.residual,
               "xi": sol.xi, "w_arg": sol.w_arg}
    else:
        if not snr > math.e:
            raise UsageError("snr must exceed e")
        k = args.k if args.k is not None else default_k(1.0, 0.1)
        eps = _setup(achievability_eps, snr, args.n, k)
        cols = ["policy", "snr", "n", "k", "eps", "snr_eps"]
        rec = {"policy": "achievability", "snr": snr, "n": args.n, "k": k, "eps": eps,
               "snr_eps": snr**eps}
    if args.format == "json":
        text = to_json([rec], cols)
    else:
        text = to_csv([rec], cols)
    sys.stdout.write(text)
    if args.out:
        write_output(args.out, text, manifest(args.command, _config_dict(args), None, [args.out],
                                              argv=sys.argv[1:]))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"jscc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"jscc {args.command}: runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
