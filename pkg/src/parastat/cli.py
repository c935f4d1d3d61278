"""Command-line front end.

Every command prints one JSON report on stdout.  Failures print a JSON
error object on stderr and exit with 2 (usage), 3 (budget), 4 (bad data)
or 5 (no convergence).  Options may also come from a flat ``key = value``
config file; command-line values win over the file, which wins over the
built-in defaults.
"""

import argparse
import csv
import io
import json
import math
import sys
import warnings
from importlib import resources

import numpy as np

from . import condensate, debt, flicker, partitions, quadrature, solver, thresholds
from .errors import BudgetExceeded, OutOfRange, ParastatError

SCHEMA_VERSION = 1
MIN_SAMPLES = condensate.MIN_SAMPLES


# ---------------------------------------------------------------- output

def _fmt(obj):
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(report):
    """JSON text with floats written to 17 significant digits."""
    return _fmt(report)


def _report(command, body):
    return {"schema": f"parastat.{command}", "schema_version": SCHEMA_VERSION, **body}


# ---------------------------------------------------------------- commands

def cmd_threshold(args):
    n = args.n
    if not n >= 2:
        raise _Usage(f"--n must be at least 2, got {n:g}")
    alpha = args.dim / 2 if args.dim is not None else (1.0 if args.alpha is None else args.alpha)
    if not 0 < alpha <= 1:
        raise _Usage(f"alpha must lie in (0, 1], got {alpha:g}")
    if args.method:
        methods = [args.method]
    elif alpha == 1.0:
        methods = ["leading_order", "erdos_two_term", "numeric_fixed_point"]
    elif alpha == 0.5:
        methods = ["d1_closed", "general_alpha", "numeric_fixed_point"]
    else:
        methods = ["general_alpha", "numeric_fixed_point"]
    out = []
    for m in methods:
        if m == "leading_order":
            r = thresholds.k0_leading(n)
        elif m == "erdos_two_term":
            r = thresholds.k0_erdos(n)
        elif m == "d1_closed":
            r = thresholds.k0_d1(n)
        elif m == "general_alpha":
            r = thresholds.k0_general(n, alpha)
        else:
            r = thresholds.k0_numeric(n, alpha)
        out.append({"method": r.method, "k0": r.k0, "alpha": r.alpha})
    constants = {"partition_c": thresholds.C_PARTITION}
    if alpha == 1.0:
        constants["centering_alpha"] = thresholds.ALPHA_CENTER
    else:
        constants["regularized_c"] = quadrature.regularized_c(alpha).value
        constants["bose_integral_1"] = quadrature.bose_integral(1.0, alpha).value
    if alpha == 0.5:
        constants["c_one_dim"] = quadrature.c_one_dim().value
    return _report("threshold", {"n": n, "alpha": alpha, "thresholds": out,
                                 "constants": constants})


def cmd_solve(args):
    problem = solver.ParastatProblem(args.n, args.k, args.alpha)
    p = solver.solve(problem, method=args.method)
    return _report("solve", {
        "n": args.n, "k": args.k, "alpha": args.alpha, "b": p.b, "kappa": p.kappa,
        "mu": p.mu, "shift": p.shift, "residuals": list(p.residuals), "method": p.method,
        "entropy": solver.entropy(problem, p),
    })


def _need_seed(args):
    if args.seed is None:
        raise _Usage("--seed is required for sampling commands")


def _samples(args):
    if args.samples < MIN_SAMPLES:
        print(f"warning: --samples {args.samples} raised to {MIN_SAMPLES}", file=sys.stderr)
        return MIN_SAMPLES
    return args.samples


def cmd_partition_sample(args):
    _need_seed(args)
    table = partitions.cached_table(args.n, args.k, args.mode)
    draws = partitions.sample_partitions(table, args.n, args.k, args.samples, args.seed,
                                         exactly_k=args.exactly_k, threads=args.threads)
    return _report("partition-sample", {
        "n": args.n, "k": args.k, "seed": args.seed, "exactly_k": args.exactly_k,
        "mode": table.mode, "samples": [list(s.parts()) for s in draws],
        "n0": [s.n0 for s in draws],
    })


def _parse_k(text, n):
    if text.startswith("auto"):
        factor = float(text[4:] or 1)
        return int(round(factor * thresholds.k0_erdos(n).k0))
    return int(text)


def _parse_phi(text):
    kind, _, rest = text.partition(":")
    vals = tuple(float(v) for v in rest.split(",")) if rest else ()
    names = {"exp": "exp_decay", "indicator": "indicator_interval", "poly": "polynomial_cutoff"}
    if kind not in names:
        raise _Usage(f"unknown test function {text!r}")
    if kind == "exp" and not vals:
        vals = (1.0,)
    return condensate.TestFunction(names[kind], vals)


def cmd_condense(args):
    _need_seed(args)
    n = args.n
    k = _parse_k(args.k, n)
    samples = _samples(args)
    if (n + 1) * (k + 1) > args.max_cells:
        raise BudgetExceeded(f"table of {(n + 1) * (k + 1)} cells exceeds --max-cells {args.max_cells}")
    table = partitions.cached_table(n, k)
    draws = partitions.sample_partitions(table, n, k, samples, args.seed, threads=args.threads)
    th = thresholds.k0_erdos(n)
    body = {"n": n, "k": k, "seed": args.seed, "samples": samples, "k0": th.k0,
            "k0_method": th.method}
    if k > th.k0:
        br = condensate.condensate_bound_check(draws, k, th, args.delta, args.delta1)
        body["bound"] = {
            "band_width": br.band_width, "tail_exponent": br.tail_exponent, "bound": br.bound,
            "violation_fraction": br.violation_fraction, "mc_slack": br.mc_slack,
            "violations_ok": br.violations_ok, "median_abs_deviation": br.median_abs_deviation,
            "median_ok": br.median_ok,
        }
    else:
        body["bound"] = None
    phi = _parse_phi(args.phi)
    k0n = thresholds.k0_numeric(n).k0
    if k <= k0n:
        problem = solver.ParastatProblem(n, k)
        rep = condensate.weak_convergence_statistic(draws, problem, solver.solve(problem), phi)
        trunc = None
    else:
        problem = solver.ParastatProblem(n, k0n)
        rep = condensate.weak_convergence_statistic(draws, problem, solver.solve(problem), phi,
                                                    truncate_a=args.truncate_a)
        trunc = args.truncate_a
    body["weak_convergence"] = {"statistic": rep.statistic, "spread": rep.spread,
                                "median_abs": rep.median_abs, "truncate_a": trunc}
    return _report("condense", body)


def _portfolio(args):
    if args.portfolio:
        return debt.read_portfolio_csv(args.portfolio)
    with resources.as_file(resources.files("parastat") / "data" / "sample_portfolio.csv") as p:
        return debt.read_portfolio_csv(p)


def _write_plot(path, series):
    lam_rows, flow_rows = debt.plot_tables(series)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["table", "x", "y"])
        w.writerows(("lambda", _fmt(x), _fmt(y)) for x, y in lam_rows)
        w.writerows(("flow", _fmt(x), _fmt(y)) for x, y in flow_rows)


def _verdict_fields(v):
    out = {"mean_duration_T": v.T, "threshold": v.threshold, "threshold_kind": v.kind,
           "crisis": v.crisis, "b_estimate": v.b}
    if v.alpha is not None:
        out["alpha_fit"] = v.alpha
    return out


def cmd_debt(args):
    if args.window is None:
        raise _Usage("--window is required")
    series = debt.ingest(_portfolio(args), args.window, args.bucket_width, args.fill_step)
    if args.b is not None:
        b = args.b
    elif args.window_s is not None:
        b = debt.estimate_b(series, args.window_s, args.window_a).b
    else:
        raise _Usage("give --b or --window-s to estimate it")
    if args.plot_out:
        _write_plot(args.plot_out, series)
    body = _verdict_fields(debt.crisis_verdict(debt.stretch_durations(series, args.stretch), b))
    if args.sweep is not None:
        grid = np.linspace(1.0, args.sweep, args.steps)
        body["sweep"] = [
            {"rho": float(r),
             **_verdict_fields(debt.crisis_verdict(debt.stretch_durations(series, float(r)), b))}
            for r in grid
        ]
    return _report("debt", body)


def cmd_flicker(args):
    spec = flicker.cosine_transform(flicker.read_series_csv(args.series))
    if args.format == "csv":
        return _Csv(["i", "a_i", "A_l"], flicker.spectrum_table(spec))
    fit = flicker.estimate_alpha(spec)
    alpha = fit.alpha if args.alpha is None else args.alpha
    v = flicker.flicker_verdict(spec, alpha)
    body = {"s": spec.s, "alpha_fit": fit.alpha, "alpha": alpha, "gamma": v.gamma,
            "energy": v.energy, "normalized_energy": v.normalized_energy,
            "critical_energy": v.critical_energy, "explosive": v.explosive, "s0": v.s0,
            "s_tilde": v.s_tilde, "s_tilde_analogy": v.s_tilde_analogy, "beta": v.beta,
            "weak_convergence": None}
    if args.weak:
        _need_seed(args)
        rep = flicker.flicker_weak_convergence(spec, alpha, _parse_phi(args.phi),
                                               samples=_samples(args), seed=args.seed)
        body["weak_convergence"] = {"statistic": rep.statistic, "spread": rep.spread,
                                    "median_abs": rep.median_abs}
    return _report("flicker", body)


def _iv(v):
    return {"value": v.value, "abs_error": v.abs_error_estimate, "method": v.method}


def cmd_constants(args):
    a = args.alpha
    if not 0 < a < 1:
        raise _Usage(f"--alpha must lie in (0, 1), got {a:g}")
    f1, f2 = quadrature.c_one_dim_factors()
    out = {"alpha": a,
           "bose_integral_1": _iv(quadrature.bose_integral(1.0, a)),
           "bose_integral_1_quadrature": _iv(quadrature.bose_integral(1.0, a, method="quadrature")),
           "regularized_c": {r: _iv(quadrature.regularized_c(a, rule=r)) for r in ("gauss", "simpson")},
           "c1": _iv(quadrature.c1_const(a)),
           "c_one_dim": _iv(quadrature.c_one_dim()),
           "c_one_dim_factors": [_iv(f1), _iv(f2)],
           "partition_c": thresholds.C_PARTITION,
           "centering_alpha": thresholds.ALPHA_CENTER}
    return _report("constants", out)


class _Csv:
    def __init__(self, header, rows):
        self.header, self.rows = header, rows

    def render(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows([_fmt(v) for v in row] for row in self.rows)
        return buf.getvalue().rstrip("\n")


# ---------------------------------------------------------------- parser

class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors become usage errors reported as JSON."""

    def error(self, message):
        raise _Usage(message)


def build_parser():
    p = _Parser(prog="parastat", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value file of option defaults")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("threshold", help="threshold estimates k0(n)")
    s.add_argument("--n", type=float, required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float, help="measure exponent (default 1)")
    g.add_argument("--dim", type=int, help="dimension d; alpha = d/2")
    s.add_argument("--method", choices=thresholds.METHODS)
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("solve", help="solve for b and kappa")
    s.add_argument("--n", type=float, required=True)
    s.add_argument("--k", type=float, required=True)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--method", choices=("newton", "bracketed"), default="newton")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("partition-sample", help="uniform partitions of n into at most k parts")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--samples", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--exactly-k", action="store_true")
    s.add_argument("--mode", choices=("exact", "log_space"))
    s.set_defaults(func=cmd_partition_sample)

    s = sub.add_parser("condense", help="condensate band and weak-convergence checks")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", default="auto3", help="parts budget, or autoF for F times k0")
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--seed", type=int)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--delta1", type=float, default=0.15)
    s.add_argument("--phi", default="exp:1", help="exp:RATE, indicator:LO,HI or poly:CUTOFF,POWER")
    s.add_argument("--truncate-a", type=float, default=5.0)
    s.add_argument("--max-cells", type=int, default=partitions.MAX_CELLS)
    s.set_defaults(func=cmd_condense)

    s = sub.add_parser("debt", help="crisis verdict for a loan portfolio")
    s.add_argument("--portfolio", help="CSV with size,duration[,timestamp]; default: bundled sample")
    s.add_argument("--window", type=float, help="averaging window (required)")
    s.add_argument("--bucket-width", type=float)
    s.add_argument("--fill-step", type=float)
    s.add_argument("--b", type=float)
    s.add_argument("--window-s", type=int)
    s.add_argument("--window-a", type=float, default=2.0)
    s.add_argument("--stretch", type=float, default=1.0)
    s.add_argument("--sweep", type=float, help="sweep the stretch from 1 to this value")
    s.add_argument("--steps", type=int, default=20)
    s.add_argument("--plot-out", help="write (x, lambda) and (duration, flow) rows to this CSV")
    s.set_defaults(func=cmd_debt)

    s = sub.add_parser("flicker", help="spectral exponent and energy verdict for a series")
    s.add_argument("--series", required=True, help="CSV with a value column, or t,value")
    s.add_argument("--format", choices=("json", "csv"), default="json",
                   help="csv prints the spectrum table i,a_i,A_l instead of the verdict")
    s.add_argument("--alpha", type=float)
    s.add_argument("--weak", action="store_true", help="also run the weak-convergence check")
    s.add_argument("--phi", default="exp:1")
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_flicker)

    s = sub.add_parser("constants", help="integral constants at an exponent")
    s.add_argument("--alpha", type=float, default=0.5)
    s.set_defaults(func=cmd_constants)
    return p


def read_config(path):
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise _Usage(f"{path}:{lineno}: expected key = value")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _apply_config(parser, argv, config):
    """Install config values as defaults on the chosen subcommand."""
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command = next((t for t in argv if t in sub_action.choices), None)
    if command is None:
        return
    subparser = sub_action.choices[command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in config.items():
        if key not in known or key == "help":
            raise _Usage(f"unknown config key {key!r} for {command}")
        act = known[key]
        if isinstance(act, argparse._StoreTrueAction):
            val = raw.lower() in ("1", "true", "yes", "on")
        else:
            val = act.type(raw) if act.type else raw
        act.required = False
        defaults[key] = val
    subparser.set_defaults(**defaults)


def _error(kind, message, code):
    print(dumps({"schema": "parastat.error", "schema_version": SCHEMA_VERSION,
                 "error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    try:
        known, _ = pre.parse_known_args(argv)
        if known.config:
            _apply_config(parser, argv, read_config(known.config))
    except _Usage as exc:
        return _error("UsageError", str(exc), 2)
    except OSError as exc:
        return _error(type(exc).__name__, str(exc), 2)
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        return _error("UsageError", str(exc), 2)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            report = args.func(args)
    except _Usage as exc:
        return _error("UsageError", str(exc), 2)
    except ParastatError as exc:
        return _error(type(exc).__name__, str(exc), exc.exit_code)
    except MemoryError:
        return _error("BudgetExceeded", "out of memory", BudgetExceeded.exit_code)
    except (OSError, ValueError) as exc:
        return _error(type(exc).__name__, str(exc), OutOfRange.exit_code)
    print(report.render() if isinstance(report, _Csv) else dumps(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
