"""Command-line front end.

Exit codes: 0 success, 1 failed validation, 2 usage or domain error,
3 simulation step budget exceeded.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from . import __version__
from . import qsd, sde, spectrum
from .special import SpecialFunctionError, kummer_m, tricomi_u, whittaker_M, whittaker_W

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def fmt(v):
    """17 significant digits, round-trip safe."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _header(config):
    return f"# shiryaev-qsd {__version__}\n# config: {json.dumps(config)}\n"


def write_csv(out, config, columns, rows):
    buf = io.StringIO()
    buf.write(_header(config))
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    out.write(buf.getvalue())


def write_json(out, config, result):
    doc = {"version": __version__, "config": config, "result": result}
    out.write(json.dumps(doc, indent=2, allow_nan=True) + "\n")


def _config(args, *names):
    return {n: getattr(args, n) for n in names}


def _positive(name, v):
    if not (v > 0 and math.isfinite(v)):
        raise UsageError(f"{name} must be positive and finite, got {v}")


# --- subcommands ------------------------------------------------------------

def cmd_eigenvalue(args, out):
    _positive("A", args.A)
    sp = spectrum.principal_eigenvalue(args.A)
    a_star = spectrum.critical_threshold()
    cfg = _config(args, "A")
    rec = dict(sp.as_dict(), A_star=a_star)
    if args.format == "json":
        write_json(out, cfg, rec)
    elif args.format == "csv":
        write_csv(out, cfg, ["A", "lambda", "xi", "regime", "A_star"], [[sp.A, sp.lam, sp.xi, sp.regime.value, a_star]])
    else:
        out.write(
            f"A={fmt(sp.A)} lambda={fmt(sp.lam)} xi={fmt(sp.xi)} "
            f"regime={sp.regime.value} A*={fmt(a_star)}\n"
        )
    return EXIT_OK


def cmd_curve(args, out):
    if not (0 < args.A_min < args.A_max) or args.n < 2:
        raise UsageError("need 0 < A-min < A-max and n >= 2")
    grid = np.geomspace(args.A_min, args.A_max, args.n) if args.log else np.linspace(args.A_min, args.A_max, args.n)
    pts = spectrum.eigenvalue_curve(grid)
    cfg = _config(args, "A_min", "A_max", "n", "log")
    if args.format == "json":
        write_json(out, cfg, [p.as_dict() for p in pts])
    else:
        write_csv(out, cfg, ["A", "lambda", "xi"], [[p.A, p.lam, p.xi] for p in pts])
    return EXIT_OK


def cmd_dist(args, out):
    _positive("A", args.A)
    if args.n < 1:
        raise UsageError("n must be at least 1")
    if args.lam is None:
        model = qsd.principal_model(args.A)
    else:
        model = qsd.family_pdf(args.A, args.lam)
    inv_x = np.arange(1, args.n + 1) / args.n / args.A
    x = 1.0 / inv_x
    x[-1] = args.A
    pdf = qsd.qsd_pdf(model, x)
    cdf = qsd.qsd_cdf(model, x)
    cfg = dict(_config(args, "A", "n"), **{"lambda": model.lam, "form": model.form, "family": model.family_flag})
    cols = ["x", "inv_x", "pdf", "cdf"]
    rows = list(zip(x, inv_x, pdf, cdf))
    if args.format == "json":
        write_json(out, cfg, {c: [float(r[i]) for r in rows] for i, c in enumerate(cols)})
    else:
        write_csv(out, cfg, cols, rows)
    return EXIT_OK


def cmd_simulate(args, out):
    if args.paths < 1:
        raise UsageError(f"--paths must be at least 1, got {args.paths}")
    cfg = sde.SimConfig(
        A=args.A, x0=args.x0, dt=args.dt, horizon=args.horizon,
        n_paths=args.paths, seed=args.seed, kill=not args.no_kill, n_bins=args.bins,
    )
    ens = sde.simulate(cfg, backend=args.backend, workers=args.workers)
    rec = ens.to_dict()
    sp = spectrum.principal_eigenvalue(cfg.A)
    rec["lambda_A"] = sp.lam
    if cfg.kill:
        model = qsd.principal_model(cfg.A)
        try:
            rec["ks"] = sde.ks_distance(ens, model)
        except sde.InsufficientDataError as exc:
            rec["ks"], rec["ks_error"] = None, str(exc)
        try:
            rec["rate_estimate"] = sde.estimate_kill_rate(ens)
        except sde.InsufficientDataError as exc:
            rec["rate_estimate"], rec["rate_error"] = None, str(exc)
    else:
        d = ens.survivor_values - cfg.x0 - cfg.horizon
        rec["martingale_mean"] = float(d.mean())
        rec["martingale_stderr"] = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else None
    rec["survivors"] = rec.pop("n_survivors")
    config = rec.pop("config")
    write_json(out, config, rec)
    return EXIT_OK


def cmd_validate(args, out):
    from . import oracle

    _positive("A", args.A)
    rep = oracle.run_suite(args.A, include_mc=args.suite == "all")
    write_json(out, _config(args, "A", "suite"), rep.as_dict())
    return EXIT_OK if rep.passed else EXIT_FAIL


_SF = {
    "M": lambda a: whittaker_M(a.a, a.b, a.z),
    "W": lambda a: whittaker_W(a.a, a.b, a.z),
    "kummer": lambda a: kummer_m(a.a, a.b, a.z),
    "tricomi": lambda a: tricomi_u(a.a, a.b, a.z),
}


def cmd_sf_eval(args, out):
    r = _SF[args.fn](args)
    cfg = _config(args, "fn", "a", "b", "z")
    rec = {"value": r.value, "est_rel_error": r.est_rel_error, "method": r.method}
    if args.format == "json":
        write_json(out, cfg, rec)
    else:
        out.write(f"{fmt(r.value)} rel_err~{r.est_rel_error:.1e} method={r.method}\n")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="shiryaev-qsd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=("csv", "json"), default="csv"):
        sp.add_argument("--format", choices=formats, default=default)
        sp.add_argument("--out", default=None, help="output path (default stdout)")

    e = sub.add_parser("eigenvalue", help="principal eigenvalue for one kill level")
    e.add_argument("--A", type=float, required=True)
    common(e, ("text", "csv", "json"), "text")
    e.set_defaults(func=cmd_eigenvalue)

    c = sub.add_parser("curve", help="eigenvalue curve over a grid of A")
    c.add_argument("--A-min", dest="A_min", type=float, default=0.05)
    c.add_argument("--A-max", dest="A_max", type=float, default=2.0)
    c.add_argument("--n", type=int, default=200)
    c.add_argument("--log", action="store_true", help="log-spaced grid")
    common(c)
    c.set_defaults(func=cmd_curve)

    d = sub.add_parser("dist", help="pdf and cdf on an even grid in 1/x")
    d.add_argument("--A", type=float, required=True)
    d.add_argument("--lambda", dest="lam", type=float, default=None, help="family member, 0 < lambda < lambda_A")
    d.add_argument("--n", type=int, default=200)
    common(d)
    d.set_defaults(func=cmd_dist)

    s = sub.add_parser("simulate", help="killed-path Monte Carlo")
    s.add_argument("--A", type=float, required=True)
    s.add_argument("--x0", type=float, default=None, help="start (default A + 1)")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--horizon", type=float, default=10.0)
    s.add_argument("--paths", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bins", type=int, default=400)
    s.add_argument("--no-kill", action="store_true", help="plain SDE, for the martingale check")
    s.add_argument("--backend", choices=("cython", "python"), default=None)
    s.add_argument("--workers", type=int, default=None)
    common(s, ("json",), "json")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="run the oracle suite")
    v.add_argument("--A", type=float, required=True)
    v.add_argument("--suite", choices=("analytic", "all"), default="analytic")
    common(v, ("json",), "json")
    v.set_defaults(func=cmd_validate)

    f = sub.add_parser("sf", help="special-function debugging")
    fsub = f.add_subparsers(dest="sf_command", required=True)
    fe = fsub.add_parser("eval", help="evaluate one special function")
    fe.add_argument("--fn", choices=sorted(_SF), required=True)
    fe.add_argument("--a", type=float, required=True, help="a (Whittaker) or alpha (Kummer/Tricomi)")
    fe.add_argument("--b", type=float, required=True, help="b (Whittaker) or beta (Kummer/Tricomi)")
    fe.add_argument("--z", type=float, required=True)
    common(fe, ("text", "json"), "text")
    fe.set_defaults(func=cmd_sf_eval)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    buf = io.StringIO()
    try:
        code = args.func(args, buf)
    except sde.StepBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, ValueError, SpecialFunctionError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
