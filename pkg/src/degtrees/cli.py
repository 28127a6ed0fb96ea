"""Command-line interface.

Subcommands: census, distribution, constants, indices, certify, tau.

Exit codes: 0 ok, 1 certification failure, 2 usage, 3 resource limit,
4 insufficient precision.  Counts are always written as decimal strings.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from fractions import Fraction

import mpmath

from . import census, indices, oracle, singularity
from .census import Marking

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_RESOURCE, EXIT_PRECISION = 0, 1, 2, 3, 4
PREC_ENV = "DEGTREES_PREC"
MAX_UNIVARIATE_ORDER = 3000
MAX_BIVARIATE_ORDER = 400


class UsageError(ValueError):
    pass


class ResourceError(RuntimeError):
    pass


def load_schema() -> dict:
    """The JSON schema every JSON-emitting command validates against."""
    from importlib import resources

    text = resources.files("degtrees").joinpath("schemas/output.schema.json").read_text("utf-8")
    return json.loads(text)


def default_prec() -> int:
    raw = os.environ.get(PREC_ENV)
    if raw is None:
        return singularity.DEFAULT_PREC
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{PREC_ENV} must be an integer, got {raw!r}") from None


def fmt_real(x, digits: int) -> str:
    """Fixed-point decimal with ``digits`` significant digits (no exponent)."""
    with mpmath.workdps(digits + 10):
        x = mpmath.mpf(x)
        if x == 0:
            return "0.0"
        return mpmath.nstr(x, digits, min_fixed=-mpmath.inf, max_fixed=mpmath.inf)


def _trusted_digits(value, err, cap: int) -> int:
    # significant digits backed by an absolute error estimate
    value, err = abs(mpmath.mpf(value)), abs(mpmath.mpf(err))
    if value == 0 or err == 0:
        return cap
    return max(3, min(cap, int(mpmath.floor(mpmath.log10(value / err)))))


def fmt_rational(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def parse_marks(text: str, delta: int) -> list[Marking]:
    """``all`` or a comma list such as ``degree:1,edge:2,2``."""
    if text.strip() == "all":
        return indices.vertex_markings(delta) + indices.edge_markings(delta)
    found = re.findall(r"degree:\d+|edge:\d+,\d+|none", text)
    leftover = re.sub(r"degree:\d+|edge:\d+,\d+|none|,", "", text).strip()
    if not found or leftover:
        raise UsageError(f"cannot parse marks {text!r}")
    return [Marking.parse(m) for m in found]


def _marking(text: str) -> Marking:
    try:
        return Marking.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _delta(value: int) -> int:
    try:
        return census.check_delta(value)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _limit(order: int, cap: int, what: str) -> None:
    if order < 1:
        raise UsageError(f"{what} order must be >= 1")
    if order > cap:
        raise ResourceError(f"{what} order {order} exceeds the limit {cap}")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_census(args) -> tuple[int, str]:
    delta = _delta(args.delta)
    _limit(args.n, MAX_UNIVARIATE_ORDER, "census")
    tables = census.build_free(delta, args.n)
    rows = [(n, tables.p[n], tables.r[n], tables.t[n]) for n in range(1, args.n + 1)]
    if args.format == "json":
        return EXIT_OK, _dump_json({
            "delta": delta,
            "order": args.n,
            "rows": [{"n": n, "p": str(p), "r": str(r), "t": str(t)} for n, p, r, t in rows],
        })
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "p_n", "r_n", "t_n"])
    w.writerows(rows)
    return EXIT_OK, buf.getvalue()


def cmd_distribution(args) -> tuple[int, str]:
    delta = _delta(args.delta)
    marking = _marking(args.mark)
    if marking.kind == "none":
        raise UsageError("distribution needs a degree or edge marking")
    _limit(args.n, MAX_BIVARIATE_ORDER, "distribution")
    table = census.distribution(census.build_marked(delta, marking, args.n).t, args.n)
    prec = args.prec or default_prec()
    skew = fmt_real(table.skewness(prec), prec)
    if args.format == "json":
        return EXIT_OK, _dump_json({
            "delta": delta,
            "marking": str(marking),
            "n": args.n,
            "total": str(table.total),
            "counts": [{"k": k, "count": str(c)} for k, c in table.counts.items()],
            "mean": fmt_rational(table.mean),
            "variance": fmt_rational(table.variance),
            "third_central_moment": fmt_rational(table.third_central),
            "skewness": skew,
            "precision": prec,
        })
    buf = io.StringIO()
    buf.write(f"# precision: {prec} significant digits\n")
    buf.write(f"# delta={delta} marking={marking} total={table.total}\n")
    buf.write(f"# mean={fmt_rational(table.mean)}\n")
    buf.write(f"# variance={fmt_rational(table.variance)}\n")
    buf.write(f"# skewness={skew}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "k", "count"])
    for k, c in table.counts.items():
        w.writerow([args.n, k, c])
    return EXIT_OK, buf.getvalue()


def _constants_payload(c: singularity.AsymptoticConstants, prec: int, h) -> dict:
    d = c.diagnostics
    e1, e2 = d["f1_error_estimate"], d["f2_error_estimate"]
    # mu and sigma inherit the relative errors of f'(1) and f''(1)
    dig1 = _trusted_digits(c.f_prime_1, e1, prec)
    dig2 = _trusted_digits(c.f_double_prime_1, e2, prec)
    notes = []
    if c.marking.exceeds(c.delta):
        notes.append("mark exceeds the degree bound: statistic is identically zero")
    if c.marking.kind == "edge" and (c.marking.i, c.marking.j) == (1, 1):
        notes.append("edge type (1,1) occurs only in the two-vertex tree")
    return {
        "delta": c.delta,
        "marking": str(c.marking),
        "precision": prec,
        "h": fmt_real(h, 6),
        "x0": fmt_real(c.x0, prec),
        "f_prime_1": fmt_real(c.f_prime_1, dig1),
        "f_double_prime_1": fmt_real(c.f_double_prime_1, dig2),
        "mu": fmt_real(c.mu, dig1),
        "sigma": fmt_real(c.sigma, min(dig1, dig2)),
        "mu_nullvector": fmt_real(c.mu_nullvector, prec - 5),
        "null_vector": [fmt_real(v, prec - 5) for v in c.null_vector],
        "tau_hat": fmt_real(c.tau_hat, 12),
        "f1_residual": mpmath.nstr(d["residuals"]["u=1"], 5),
        "f1_error_estimate": mpmath.nstr(e1, 5),
        "f2_error_estimate": mpmath.nstr(e2, 5),
        "tail_order": d["tail_order"],
        "notes": notes,
    }


def cmd_constants(args) -> tuple[int, str]:
    delta = _delta(args.delta)
    marking = _marking(args.mark)
    prec = args.prec or default_prec()
    try:
        c = singularity.asymptotic_constants(delta, marking, prec, args.h)
    except singularity.PrecisionError as exc:
        diag = {k: (mpmath.nstr(v, 5) if isinstance(v, mpmath.mpf) else str(v))
                for k, v in exc.diagnostics.items() if k != "newton_steps_u1"}
        return EXIT_PRECISION, _dump_json({
            "delta": delta, "marking": str(marking), "error": str(exc), "diagnostics": diag})
    return EXIT_OK, _dump_json(_constants_payload(c, prec, args.h))


def cmd_indices(args) -> tuple[int, str]:
    delta = _delta(args.delta)
    prec = args.prec or default_prec()
    for n in args.n or ():
        _limit(n, MAX_BIVARIATE_ORDER, "indices")
    reports = []
    for kind, values in (("zagreb", args.alpha or ()), ("randic", args.beta or ())):
        for raw in values:
            build = indices.zagreb_constant if kind == "zagreb" else indices.randic_constant
            rep = build(delta, raw, prec, args.h, orders=tuple(args.n or ()))
            reports.append({
                "kind": kind,
                "exponent": raw,
                "constant": fmt_real(rep.constant, prec - 15),
                "breakdown": [
                    {"term": (str(k) if kind == "zagreb" else f"{k[0]},{k[1]}"),
                     "value": fmt_real(v, prec - 15)}
                    for k, v in rep.breakdown.items()],
                "finite_n": [
                    {"n": n,
                     "expected_over_n": (fmt_rational(v) if isinstance(v, Fraction)
                                         else fmt_real(v, prec)),
                     "gap": fmt_real(rep.gap(n), 10)}
                    for n, v in rep.finite_n.items()],
            })
    if not reports:
        raise UsageError("indices needs at least one --alpha or --beta")
    return EXIT_OK, _dump_json({"delta": delta, "precision": prec, "reports": reports})


def cmd_certify(args) -> tuple[int, str]:
    delta = _delta(args.delta)
    if args.n < 1:
        raise UsageError("certify order must be >= 1")
    if args.n > oracle.ORDER_BOUND:
        raise ResourceError(f"order {args.n} exceeds the oracle bound {oracle.ORDER_BOUND}")
    marks = parse_marks(args.marks, delta)
    mismatches = []
    checked = 0
    free = census.build_free(delta, args.n)
    series = {m: census.build_marked(delta, m, args.n).t for m in marks}
    for n in range(1, args.n + 1):
        count = oracle.count_trees(n, delta)
        if count != free.t[n]:
            mismatches.append({"marking": "none", "n": n, "k": None,
                               "census": str(free.t[n]), "oracle": str(count)})
        hists = oracle.aggregate_all(n, delta, marks)
        for m in marks:
            checked += 1
            got = {k: c for k, c in enumerate(series[m].coeffs[n]) if c}
            want = hists[m]
            if got != want:
                k = min(k for k in set(got) | set(want) if got.get(k, 0) != want.get(k, 0))
                mismatches.append({"marking": str(m), "n": n, "k": k,
                                   "census": str(got.get(k, 0)), "oracle": str(want.get(k, 0))})
    payload = {
        "delta": delta,
        "order": args.n,
        "marks": [str(m) for m in marks],
        "tables_checked": checked,
        "mismatches": mismatches,
        "status": "pass" if not mismatches else "fail",
    }
    return (EXIT_OK if not mismatches else EXIT_MISMATCH), _dump_json(payload)


def cmd_tau(args) -> tuple[int, str]:
    delta = _delta(args.delta)
    if args.n < 100:
        raise UsageError("tau needs --n >= 100")
    _limit(args.n, MAX_UNIVARIATE_ORDER, "tau")
    prec = args.prec or default_prec()
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = singularity.estimate_tau(delta, args.n, prec)
    digits = prec - 10
    buf = io.StringIO()
    buf.write(f"# precision: {digits} significant digits\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "s_n", "extrapolant"])
    for n, s, ext in est.trace:
        w.writerow([n, fmt_real(s, digits), "" if ext is None else fmt_real(ext, digits)])
    footer = {"delta": delta, "order": args.n, "tau_hat": fmt_real(est.tau_hat, digits),
              "diverging": est.diverging}
    if est.diverging:
        footer["warning"] = "relative changes of the extrapolant are increasing"
    buf.write("# " + json.dumps(footer) + "\n")
    return EXIT_OK, buf.getvalue()


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degtrees",
        description="Exact and asymptotic enumeration of trees with bounded maximum degree.")
    parser.add_argument("-o", "--output", help="write to this file instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("census", help="p_n, r_n, t_n table")
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("distribution", help="exact law of a marked statistic at order n")
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--mark", required=True, help="degree:J or edge:I,J")
    p.add_argument("--n", type=int, default=120)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--prec", type=int, default=None)
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("constants", help="x0, mu, sigma for one marking")
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--mark", required=True)
    p.add_argument("--prec", type=int, default=None)
    p.add_argument("--h", type=float, default=1e-6)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("indices", help="general Zagreb / Randic constants")
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--alpha", nargs="+", default=None)
    p.add_argument("--beta", nargs="+", default=None)
    p.add_argument("--n", type=int, nargs="+", default=None,
                   help="orders for exact finite-n comparison")
    p.add_argument("--prec", type=int, default=None)
    p.add_argument("--h", type=float, default=1e-6)
    p.set_defaults(func=cmd_indices)

    p = sub.add_parser("certify", help="census vs brute-force oracle")
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--marks", default="all")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("tau", help="trace of t_n x0^n n^(5/2)")
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--prec", type=int, default=None)
    p.set_defaults(func=cmd_tau)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code, text = args.func(args)
    except UsageError as exc:
        print(f"degtrees: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceError, oracle.ResourceLimitError, MemoryError) as exc:
        print(f"degtrees: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except singularity.PrecisionError as exc:
        print(f"degtrees: precision: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except ValueError as exc:
        print(f"degtrees: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
