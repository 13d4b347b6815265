"""Command-line front end.

Each subcommand builds a table (column names plus rows) and writes it as a
JSON envelope or as CSV.  Numbers are written with ``--precision``
significant digits.  Exit status is 0 on success, 2 for usage errors and 3
for numerical or runtime failures; diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from typing import Any, Sequence

import numpy as np

from . import __version__
from .balls import (
    LpBallSpec,
    SchattenBallSpec,
    e_n_lp,
    is_inf,
    log_volume,
    log_volume_expansion_residual,
    parse_exponent,
    threshold_lp_inf,
    threshold_schatten,
    threshold_schatten_provenance,
    volume_radius_lp_asymptotic,
    volume_radius_schatten_asymptotic,
)
from .errors import CritballsError, DomainError
from .estimators import (
    DEFAULT_INDEPENDENCE_GRID,
    gumbel_check,
    gumbel_cdf,
    independence_probe,
    intersection_scan,
    norm_clt_check,
)
from .sampling import RandomStream
from .tracywidom import tw_cdf, tw_cdf_table

TOOL = "critballs"
FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"
DEFAULT_PRECISION = 15
TW_PRECISION = 12
MIN_SAMPLES = 100


class UsageError(Exception):
    """Invalid flag combination; maps to exit status 2."""


class Table:
    def __init__(self, columns: Sequence[str], rows: list[list[Any]], summary=None):
        self.columns = list(columns)
        self.rows = rows
        self.summary = dict(summary or {})


# -- flag parsing ----------------------------------------------------------------


def _exponent(text: str) -> float:
    try:
        return parse_exponent(text)
    except (DomainError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_range(text: str) -> list[int]:
    """Inclusive ``a:b:step`` integer range."""
    parts = text.split(":")
    try:
        a, b, step = (int(v) for v in parts) if len(parts) == 3 else (*map(int, parts), 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b[:step] integers, got {text!r}") from None
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError(f"need a <= b and step > 0 in {text!r}")
    return list(range(a, b + 1, step))


def _float_range(text: str) -> list[float]:
    """Inclusive ``a:b:step`` grid; ``b`` is kept if it is hit up to rounding."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}")
    try:
        a, b, step = (float(v) for v in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers in {text!r}") from None
    if not step > 0 or b < a:
        raise argparse.ArgumentTypeError(f"need a <= b and step > 0 in {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [a + i * step for i in range(count)]


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common(parser: argparse.ArgumentParser, stochastic: bool) -> None:
    out = parser.add_argument_group("output")
    out.add_argument("--format", choices=("json", "csv"), default="json")
    out.add_argument("--out", metavar="PATH", default=None,
                     help="write here instead of stdout")
    out.add_argument("--precision", type=int, default=None, metavar="D",
                     help="significant digits, 6 to 17")
    out.add_argument("--timestamp", choices=("fixed", "now"), default="fixed",
                     help="'fixed' writes the epoch so repeated runs are byte-identical")
    if stochastic:
        mc = parser.add_argument_group("sampling")
        mc.add_argument("--samples", type=_positive_int, required=True)
        mc.add_argument("--seed", type=_seed, default=0)
        mc.add_argument("--threads", type=_positive_int, default=1)


def _n_flags(parser, required=True):
    g = parser.add_mutually_exclusive_group(required=required)
    g.add_argument("--n", type=_positive_int)
    g.add_argument("--n-range", type=_int_range, metavar="A:B[:STEP]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL, allow_abbrev=False,
        description="Volumes, thresholds and intersection volumes of l_p and Schatten balls.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, allow_abbrev=False)

    p = add("volume", "exact log-volumes, volume radii and expansion residuals")
    p.add_argument("--family", choices=("lp", "schatten"), required=True)
    p.add_argument("--p", type=_exponent, required=True)
    p.add_argument("--beta", type=int, choices=(1, 2, 4))
    _n_flags(p)
    _common(p, stochastic=False)

    p = add("threshold", "critical dilation constants")
    p.add_argument("--family", choices=("lp", "schatten"), required=True)
    p.add_argument("--p", type=_exponent, required=True)
    p.add_argument("--q", type=_exponent, required=True)
    p.add_argument("--beta", type=int, choices=(1, 2, 4))
    _common(p, stochastic=False)

    p = add("intersect", "Monte Carlo intersection volumes of normalised balls")
    p.add_argument("--family", choices=("lp", "schatten"), required=True)
    p.add_argument("--p", type=_exponent, required=True, help="exponent of the sampled ball")
    p.add_argument("--q", type=_exponent, required=True, help="exponent of the dilated ball")
    p.add_argument("--beta", type=int, choices=(1, 2, 4))
    _n_flags(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--t", type=float)
    g.add_argument("--t-grid", type=_float_range, metavar="A:B:STEP")
    p.add_argument("--log-dilate", action="store_true",
                   help="multiply t by (log n)^{1/p}")
    _common(p, stochastic=True)

    p = add("tw-table", "Tracy-Widom distribution functions")
    p.add_argument("--beta", type=int, choices=(1, 2, 4))
    p.add_argument("--at", type=float, help="single x; overrides the grid flags")
    p.add_argument("--x-min", type=float, default=-10.0)
    p.add_argument("--x-max", type=float, default=8.0)
    p.add_argument("--step", type=float, default=0.01)
    _common(p, stochastic=False)

    p = add("independence", "joint versus product law of the rescaled extreme eigenvalues")
    p.add_argument("--beta", type=int, choices=(1, 2, 4), required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--x-grid", type=_float_range, metavar="A:B:STEP",
                   help="thresholds for the rescaled minimum")
    p.add_argument("--y-grid", type=_float_range, metavar="A:B:STEP",
                   help="thresholds for the rescaled maximum")
    _common(p, stochastic=True)

    p = add("gumbel", "sup-norm of uniform l_p-ball points against the Gumbel law")
    p.add_argument("--p", type=_exponent, required=True)
    _n_flags(p)
    _common(p, stochastic=True)

    p = add("clt", "mean of the rescaled Euclidean norm of beta-ensemble eigenvalues")
    p.add_argument("--beta", type=int, choices=(1, 2, 4), required=True)
    _n_flags(p)
    _common(p, stochastic=True)
    return parser


# -- subcommands -------------------------------------------------------------------


def _n_values(args) -> list[int]:
    return [args.n] if args.n is not None else args.n_range


def _ball(family, p, beta, n):
    if family == "lp":
        return LpBallSpec(p, n)
    if beta is None:
        raise UsageError("--beta is required for --family schatten")
    return SchattenBallSpec(p, beta, n)


def cmd_volume(args) -> Table:
    if args.family == "schatten" and not (args.p == 2.0 or is_inf(args.p)):
        raise UsageError("Schatten volumes are available for --p 2 and --p inf only")
    if args.family == "lp" and args.beta is not None:
        raise UsageError("--beta applies to --family schatten only")
    rows = []
    for n in _n_values(args):
        spec = _ball(args.family, args.p, args.beta, n)
        lv = log_volume(spec)
        d = spec.dimension
        radius = math.exp(lv.value / d)
        if args.family == "lp":
            asym = volume_radius_lp_asymptotic(args.p, n)
            if is_inf(args.p):
                resid = 0.0
            else:
                resid = e_n_lp(args.p, n) if n >= 2 else None
        else:
            asym = volume_radius_schatten_asymptotic(args.p, args.beta, n)
            resid = log_volume_expansion_residual(args.p, args.beta, n) if n >= 2 else None
        rows.append([n, d, lv.value, lv.tag, radius, asym, resid])
    return Table(
        ["n", "dimension", "log_volume", "formula", "volume_radius",
         "asymptotic_radius", "expansion_residual"],
        rows,
    )


def cmd_threshold(args) -> Table:
    p, q = args.p, args.q
    if args.family == "lp":
        if args.beta is not None:
            raise UsageError("--beta applies to --family schatten only")
        if p == q:
            t, how = 1.0, "exact: identical balls"
        elif is_inf(q):
            t, how = threshold_lp_inf(p), "exact: e^{-1/p} / Gamma(1 + 1/p)"
        else:
            raise UsageError("l_p thresholds are tabulated for --q inf or --q equal to --p")
    else:
        if args.beta is None:
            raise UsageError("--beta is required for --family schatten")
        if is_inf(p):
            raise UsageError("Schatten thresholds need a finite --p")
        t = threshold_schatten(p, q, args.beta)
        how = threshold_schatten_provenance(p, q, args.beta)
    return Table(["family", "p", "q", "beta", "threshold", "provenance"],
                 [[args.family, p, q, args.beta, t, how]])


def cmd_intersect(args) -> Table:
    if args.samples < MIN_SAMPLES:
        raise UsageError(f"--samples must be at least {MIN_SAMPLES}")
    if args.family == "schatten":
        if args.beta is None:
            raise UsageError("--beta is required for --family schatten")
        if args.p != 2.0 or not (args.q == 2.0 or is_inf(args.q)):
            raise UsageError("Schatten intersections need --p 2 and --q in {2, inf}")
    elif args.beta is not None:
        raise UsageError("--beta applies to --family schatten only")
    if args.log_dilate and is_inf(args.p):
        raise UsageError("--log-dilate needs a finite --p")
    t_grid = [args.t] if args.t is not None else args.t_grid
    if any(not t > 0.0 for t in t_grid):
        raise UsageError("dilations must be positive")
    scan = intersection_scan(args.family, args.p, args.q, args.beta, _n_values(args), t_grid,
                             args.samples, RandomStream(args.seed), args.log_dilate, args.threads)
    rows = []
    for i, n in enumerate(scan.n_list):
        for j, t in enumerate(scan.t_grid):
            est = scan.estimates[i][j]
            low, high = est.ci
            pred = None
            if scan.prediction is not None and math.isfinite(scan.prediction[i, j]):
                pred = float(scan.prediction[i, j])
            rows.append([n, t, float(scan.t_effective[i, j]), est.value, est.stderr, low, high,
                         est.successes, est.count, est.seed, pred])
    return Table(["n", "t", "t_effective", "value", "stderr", "ci_low", "ci_high",
                  "successes", "count", "seed", "gumbel_prediction"], rows)


def cmd_tw_table(args) -> Table:
    betas = [args.beta] if args.beta is not None else [1, 2, 4]
    if args.at is not None:
        x_min = x_max = args.at
        step = 1.0
    else:
        x_min, x_max, step = args.x_min, args.x_max, args.step
    if x_min < -10.0 or x_max > 8.0:
        raise UsageError("the Tracy-Widom table covers x in [-10, 8]")
    if not step > 0.0 or x_max < x_min:
        raise UsageError("need --step > 0 and --x-min <= --x-max")
    columns = {}
    grid = None
    for b in betas:
        if x_min == x_max:
            grid = np.array([x_min])
            columns[b] = np.atleast_1d(tw_cdf(b, x_min))
        else:
            table = tw_cdf_table(b, x_min, x_max, step)
            grid = table.grid
            columns[b] = table.F
    rows = [[float(x), *(float(columns[b][k]) for b in betas)] for k, x in enumerate(grid)]
    return Table(["x", *(f"F{b}" for b in betas)], rows)


def cmd_independence(args) -> Table:
    if args.samples < MIN_SAMPLES:
        raise UsageError(f"--samples must be at least {MIN_SAMPLES}")
    if args.x_grid is None and args.y_grid is None:
        grid = DEFAULT_INDEPENDENCE_GRID
    else:
        xs = args.x_grid or sorted({x for x, _ in DEFAULT_INDEPENDENCE_GRID})
        ys = args.y_grid or sorted({y for _, y in DEFAULT_INDEPENDENCE_GRID})
        grid = [(x, y) for x in xs for y in ys]
    if any(not (-5.0 <= v <= 3.0) for pt in grid for v in pt):
        raise UsageError("grid thresholds must lie in [-5, 3]")
    rep = independence_probe(args.beta, args.n, args.samples, RandomStream(args.seed),
                             grid, threads=args.threads)
    rows = [
        [float(x), float(y), float(j), float(p), float(j - p), float(s)]
        for (x, y), j, p, s in zip(rep.grid, rep.joint, rep.product, rep.point_stderr)
    ]
    summary = {"beta": rep.beta, "n": rep.n, "count": rep.count, "seed": rep.seed,
               "max_abs_gap": rep.max_abs_gap, "gap_stderr": rep.gap_stderr}
    return Table(["x", "y", "joint", "product", "gap", "gap_stderr_point"], rows, summary)


def cmd_gumbel(args) -> Table:
    if is_inf(args.p):
        raise UsageError("the Gumbel check needs a finite --p")
    if args.samples < MIN_SAMPLES:
        raise UsageError(f"--samples must be at least {MIN_SAMPLES}")
    rows = []
    for n in _n_values(args):
        if n < 3 or args.p * math.log(n) <= 1.0:
            raise UsageError(f"need n >= 3 and p log n > 1, got n={n}")
        emp, ks = gumbel_check(args.p, n, args.samples, RandomStream(args.seed).child(n),
                               args.threads)
        rows.append([n, ks, emp(0.0), float(gumbel_cdf(0.0)), emp.quantile(0.5),
                     emp.count, args.seed])
    return Table(["n", "ks", "cdf_at_0", "gumbel_cdf_at_0", "median", "count", "seed"], rows)


def cmd_clt(args) -> Table:
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    rows = []
    for n in _n_values(args):
        if n < 10:
            raise UsageError("the norm statistic needs n >= 10")
        s = norm_clt_check(args.beta, n, args.samples, RandomStream(args.seed).child(n),
                           args.threads)
        # E|X|^2 ~ Gamma(d_n / 2) gives this limit of the mean
        radial = 1.0 / (2.0 * args.beta) - 0.25
        rows.append([args.beta, n, s.mean, s.stderr, s.variance, s.count, args.seed, radial])
    return Table(["beta", "n", "mean", "stderr", "variance", "count", "seed",
                  "radial_law_mean"], rows)


COMMANDS = {
    "volume": cmd_volume,
    "threshold": cmd_threshold,
    "intersect": cmd_intersect,
    "tw-table": cmd_tw_table,
    "independence": cmd_independence,
    "gumbel": cmd_gumbel,
    "clt": cmd_clt,
}

# echoed in the envelope; --threads and --timestamp are left out on purpose
_NOT_ECHOED = {"threads", "timestamp", "command"}


# -- serialisation ---------------------------------------------------------------


def format_number(x, digits: int) -> str:
    """Decimal literal with ``digits`` significant digits (JSON-compatible)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    text = f"{x:.{digits}g}"
    return "0" if text == "-0" else text


def _encode(value, digits: int) -> str:
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (bool, np.bool_, int, np.integer, float, np.floating)):
        if isinstance(value, (float, np.floating)) and math.isinf(value):
            return json.dumps("inf" if value > 0 else "-inf")
        return format_number(value, digits)
    if isinstance(value, dict):
        items = (f"{json.dumps(str(k))}: {_encode(v, digits)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_encode(v, digits) for v in value) + "]"
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _config(args, digits: int) -> dict:
    cfg = {"subcommand": args.command, "seed": getattr(args, "seed", None),
           "format": args.format, "out": args.out, "precision": digits}
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in _NOT_ECHOED and k not in cfg}
    cfg["parameters"] = params
    return cfg


def render_json(table: Table, args, digits: int) -> str:
    stamp = (FIXED_TIMESTAMP if args.timestamp == "fixed"
             else datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))
    payload = {"columns": table.columns, "rows": table.rows}
    if table.summary:
        payload["summary"] = table.summary
    envelope = {
        "tool": TOOL,
        "version": __version__,
        "timestamp": stamp,
        "config": _config(args, digits),
        "payload": payload,
    }
    return _encode(envelope, digits) + "\n"


def _csv_cell(value, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (float, np.floating)) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = format_number(value, digits)
    return "" if text == "null" else text


def render_csv(table: Table, digits: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    extra = list(table.summary)
    writer.writerow(table.columns + extra)
    tail = [table.summary[k] for k in extra]
    for row in table.rows:
        writer.writerow([_csv_cell(v, digits) for v in list(row) + tail])
    return buf.getvalue()


# -- entry point -------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    digits = args.precision
    if digits is None:
        digits = TW_PRECISION if args.command == "tw-table" else DEFAULT_PRECISION
    try:
        if not 6 <= digits <= 17:
            raise UsageError("--precision must lie in [6, 17]")
        table = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"{TOOL} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (CritballsError, ArithmeticError, ValueError, MemoryError) as exc:
        print(f"{TOOL} {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    text = render_json(table, args, digits) if args.format == "json" else render_csv(table, digits)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"{TOOL}: cannot write {args.out}: {exc}", file=sys.stderr)
            return 3
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
