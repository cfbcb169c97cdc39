"""
Command-line front end.

Subcommands: solve, estimate-n, scaling, theory, saddle.  A ``--config``
file holds flat ``key=value`` lines using the flag names; flags override it.
Exit codes: 0 ok, 1 configuration error, 2 search cap reached.
"""

from __future__ import annotations

import argparse
import sys

from . import harness as H
from . import theory
from .saa import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_NOT_FOUND = 0, 1, 2

DEFAULTS = {
    "problem": "gauss-power", "method": None, "p": 2.0, "d": 5, "eps": 0.1, "sigma": 0.1,
    "trials": 200, "seed": 0, "out": None, "const_mult": 1.0, "regularize": False, "mu": None,
    "gamma": None, "s": None, "modulus": None, "noise": None, "n_directions": None, "R": None,
    "d_y": None, "delta_frac": None, "x0_frac": None, "n": None, "n_lo": 1, "n_cap": 1 << 20, "rel_tol": 0.0,
    "workers": 1, "axis": "eps", "grid": None, "regime": "convex-online", "params": None,
}
DEFAULT_METHOD = {"gauss-power": "saa", "sc-quad": "saa-sc", "abs-reg": "sa-md", "sharp-saddle": "saa-saddle"}
PROBLEM_KEYS = ("gamma", "s", "modulus", "noise", "n_directions", "R", "d_y", "delta_frac", "x0_frac")


class UsageError(Exception):
    pass


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _common(p: argparse.ArgumentParser):
    a = p.add_argument
    a("--config", help="key=value file; flags override it")
    a("--problem", choices=sorted(H.P.PROBLEMS))
    a("--method", choices=H.METHODS)
    a("--p", type=float, help="norm exponent of the domain (abs-reg only)")
    a("--d", type=int, help="dimension")
    a("--eps", type=float)
    a("--sigma", type=float)
    a("--trials", type=int)
    a("--seed", type=int, help="master seed")
    a("--out", help="CSV output path")
    a("--const-mult", type=float, help="multiplier on theory predictions")
    a("--regularize", action="store_const", const=True, default=None,
      help="add mu V(x, 0) before solving")
    a("--mu", type=float, help="regularisation weight (default eps / (2 kappa R^2))")
    a("--gamma", type=float, help="growth exponent (gauss-power)")
    a("--s", type=float, help="noise scale")
    a("--modulus", type=float, help="strong convexity or sharpness modulus")
    a("--noise", type=float, help="response noise (abs-reg)")
    a("--n-directions", type=int, help="number of directions (abs-reg)")
    a("--R", type=float, help="ball radius")
    a("--d-y", type=int, help="dimension of the max block (sharp-saddle)")
    a("--delta-frac", type=float, help="inner accuracy as a fraction of eps (saa)")
    a("--x0-frac", type=float, help="SA start at this fraction of R along the all-ones direction")
    a("--n", type=int, help="sample size")
    a("--n-lo", type=int, help="starting N of the search")
    a("--n-cap", type=int, help="largest N tried")
    a("--rel-tol", type=float, help="relative bracket width at which bisection stops")
    a("--workers", type=int, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpsample", description="Sample-size experiments for stochastic convex optimisation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("solve", "estimate the success rate at a fixed N"),
                       ("estimate-n", "search the minimal N reaching 1 - sigma"),
                       ("scaling", "minimal N along a grid with a log-log fit"),
                       ("theory", "print a theory prediction"),
                       ("saddle", "saddle-point run at the predicted N")):
        sp = sub.add_parser(name, help=text)
        _common(sp)
        if name == "scaling":
            sp.add_argument("--axis", choices=H.AXES)
            sp.add_argument("--grid", help="comma-separated grid values")
        if name == "theory":
            sp.add_argument("--regime", choices=theory.REGIMES)
            sp.add_argument("--params", help="comma-separated k=v overrides of the regime constants")
    return parser


def read_config(path) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key=value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def resolve(parser, argv) -> argparse.Namespace:
    """Merge flags over the config file over built-in defaults."""
    args = parser.parse_args(argv)
    file_vals = read_config(args.config) if args.config else {}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    types = {a.dest: a.type for a in sub._actions}
    for key, raw in file_vals.items():
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None:
            conv = _bool if key == "regularize" else (types.get(key) or str)
            try:
                setattr(args, key, conv(raw))
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {exc}")
    for key, val in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    if args.method is None:
        args.method = DEFAULT_METHOD[args.problem]
    return args


def base_spec(args) -> H.TrialSpec:
    params = {k: getattr(args, k) for k in PROBLEM_KEYS if getattr(args, k) is not None}
    return H.TrialSpec(problem=args.problem, method=args.method, n=args.n or 1, eps=args.eps,
                       sigma=args.sigma, d=args.d, p=args.p, params=tuple(params.items()),
                       regularize=bool(args.regularize), mu=args.mu, master_seed=args.seed)


def _write(rows, args):
    if args.out:
        try:
            H.emit_csv(rows, args.out)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}")


def _row(prefix, i, spec, est):
    return H.make_row(f"{prefix}-{i:03d}", spec, est)


def _print_estimate(spec, est):
    print(f"N={spec.n} successes={est.successes}/{est.trials} p_hat={est.p_hat:.4f} "
          f"ci=[{est.ci_low:.4f}, {est.ci_high:.4f}] gap_mean={est.gap_mean:.4g} gap_q90={est.gap_q90:.4g}")


def cmd_solve(args) -> int:
    if args.n is None:
        raise UsageError("solve needs --n")
    spec = base_spec(args)
    est = H.estimate_success(spec, args.trials, workers=args.workers)
    _print_estimate(spec, est)
    _write([_row("solve", 0, spec, est)], args)
    return EXIT_OK


def _search_rows(prefix, spec, res, start=0):
    return [_row(prefix, start + i, spec.with_(n=n), res.evaluations[n]) for i, n in enumerate(sorted(res.evaluations))]


def cmd_estimate_n(args) -> int:
    spec = base_spec(args)
    res = H.find_min_n(spec, args.sigma, args.trials, args.n_lo, args.n_cap, workers=args.workers,
                       rel_tol=args.rel_tol)
    _write(_search_rows("estimate-n", spec.with_(sigma=args.sigma), res), args)
    if not res.found:
        print(f"not found: success below {1 - args.sigma:g} up to N={args.n_cap}")
        return EXIT_NOT_FOUND
    print(f"n_min={res.n_min} bracket={res.bracket} trials={res.trials_per_point} monotone={res.monotone}")
    return EXIT_OK


def cmd_scaling(args) -> int:
    if not args.grid:
        raise UsageError("scaling needs --grid")
    try:
        grid = [float(v) for v in args.grid.split(",")]
    except ValueError:
        raise UsageError(f"bad grid {args.grid!r}")
    spec = base_spec(args)
    fit = H.scaling_run(args.axis, grid, spec, args.sigma, args.trials, args.n_lo, args.n_cap,
                        workers=args.workers, rel_tol=args.rel_tol)
    rows = []
    for i, (v, res) in enumerate(zip(grid, fit.searches)):
        if res.found:
            pt = spec.with_(grid_index=i, sigma=args.sigma, n=res.n_min,
                            **{args.axis: int(v) if args.axis == "d" else v})
            rows.append(_row("scaling", i, pt, res.evaluations[res.n_min]))
    _write(rows, args)
    for v, n in fit.points:
        print(f"{args.axis}={v:g} n_min={n}")
    if fit.excluded:
        print(f"not found at {args.axis} = {', '.join(f'{v:g}' for v in fit.excluded)}")
    print(f"slope={fit.slope:.4f} intercept={fit.intercept:.4f} r2={fit.r_squared:.4f}")
    return EXIT_NOT_FOUND if 2 * len(fit.excluded) > len(grid) else EXIT_OK


def _parse_overrides(text):
    out = {}
    for item in filter(None, (t.strip() for t in (text or "").split(","))):
        if "=" not in item:
            raise UsageError(f"bad override {item!r}")
        k, v = (t.strip() for t in item.split("=", 1))
        out[k] = v
    return out


def cmd_theory(args) -> int:
    spec = base_spec(args)
    problem = H.build_problem(spec.problem, spec.d, spec.p, spec.params)
    if args.regime == "saddle-offline":
        if spec.problem != "sharp-saddle":
            raise UsageError("saddle-offline needs a saddle problem")
        n = H.saddle_prediction(problem, args.eps, args.sigma, args.const_mult)
        print(f"regime=saddle-offline N={n}")
        return EXIT_OK
    rs = H.theory_spec(problem, args.regime, args.eps, args.sigma, args.const_mult)
    conv = {f: type(getattr(rs, f)) for f in rs.__dataclass_fields__}
    kw = {}
    for k, v in _parse_overrides(args.params).items():
        if k not in conv or k == "regime":
            raise UsageError(f"unknown regime constant {k!r}")
        kw[k] = int(float(v)) if conv[k] is int else float(v)
    rs = rs.with_(**kw)
    n = theory.predict(rs)
    print(f"regime={rs.regime} N={n}")
    for k, v in theory.factors(rs).items():
        print(f"  {k}={v:.6g}")
    return EXIT_OK


def cmd_saddle(args) -> int:
    if args.problem != "sharp-saddle":
        args.problem = "sharp-saddle"
    if args.method not in H.SADDLE_METHODS:
        args.method = "saa-saddle"
    spec = base_spec(args)
    problem = H.build_problem(spec.problem, spec.d, spec.p, spec.params)
    pred = H.saddle_prediction(problem, args.eps, args.sigma, args.const_mult)
    spec = spec.with_(n=args.n or pred)
    print(f"predicted N={pred}")
    est = H.estimate_success(spec, args.trials, workers=args.workers)
    _print_estimate(spec, est)
    _write([_row("saddle", 0, spec, est)], args)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "estimate-n": cmd_estimate_n, "scaling": cmd_scaling,
            "theory": cmd_theory, "saddle": cmd_saddle}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = resolve(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(cli_main())
