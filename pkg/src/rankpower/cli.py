"""Command-line interface: ``rankpower <command> [flags]``.

Every command prints one record to stdout, as JSON (default) or CSV. JSON
records carry ``schema_version``, ``command``, ``params``, ``results`` (a list
of rows) and, for Monte Carlo commands, ``seed``. CSV output is the
``results`` table alone, with a header row. Floats are written in their
shortest round-trip form; exact probabilities from integer arithmetic are
added as rational strings.

Exit codes: 0 on success, 2 on usage errors (diagnostic on stderr), 3 on
computational errors (the record then holds ``error`` instead of
``results``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from . import asymptotics, exact, simulate
from .distributions import DistributionFamily, Lehmann, Local, Shift
from .errors import RankPowerError
from .ranks import BUILTIN_SCORE_KINDS, RankSet, SampleSizes, score_vector

SCHEMA_VERSION = "1"
SCORE_CHOICES = [k.value for k in BUILTIN_SCORE_KINDS]
FAMILY_CHOICES = [f.value for f in DistributionFamily]
MC_TESTS = ["rank", "mp", "t-test", "perm-mean", "perm-score"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would call sys.exit itself
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _probability(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from exc


def _test_name(text: str) -> str:
    if text in SCORE_CHOICES or text in ("t-test", "perm-mean", "perm-score"):
        return text
    raise argparse.ArgumentTypeError(
        f"expected one of {', '.join(SCORE_CHOICES + ['t-test', 'perm-mean', 'perm-score'])}"
    )


# ---------------------------------------------------------------------------
# flag groups
# ---------------------------------------------------------------------------


def _sizes(p):
    p.add_argument("--m", type=_positive_int, required=True, help="first-sample size")
    p.add_argument("--n", type=_positive_int, required=True, help="second-sample size")


def _scores(p, required=True):
    p.add_argument("--scores", choices=SCORE_CHOICES, required=required, default=None if required else "wilcoxon")


def _alpha(p, required=True):
    p.add_argument("--alpha", type=_probability, required=required, default=None if required else 0.05)


def _parallel(p):
    p.add_argument("--threads", type=_positive_int, default=None, help="worker threads (env RANKPOWER_THREADS)")
    p.add_argument("--chunk-size", type=_positive_int, default=None)


def _mc(p):
    p.add_argument("--reps", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=_seed, default=0)
    _parallel(p)


def _expansions(p):
    p.add_argument(
        "--coeffs",
        action="append",
        default=None,
        metavar="FILE",
        help="coefficient table (c,p0,p1,p2) for A, then B",
    )
    p.add_argument(
        "--efficacy",
        type=_positive_float,
        nargs=2,
        default=None,
        metavar=("EA", "EB"),
        help="Gaussian local power models for A and B",
    )
    _alpha(p, required=False)
    p.add_argument("--c", type=_positive_float, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rankpower", description=__doc__.splitlines()[0])
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--format", choices=["json", "csv"], default=argparse.SUPPRESS)
        return p

    p = add("null-dist", "exact null law of a linear rank statistic")
    _sizes(p)
    _scores(p)
    _parallel(p)

    p = add("critical", "exact randomized critical value")
    _sizes(p)
    _scores(p)
    _alpha(p)
    p.add_argument("--conservative", action="store_true", help="never reject on the boundary")

    p = add("prob-rankset", "probability of one rank set under (F, F^a)")
    _sizes(p)
    p.add_argument("--a", type=_positive_float, required=True)
    p.add_argument("--ranks", type=_int_list, required=True, help="second-sample ranks, e.g. 2,4")

    p = add("power-exact", "exact power under (F, F^a)")
    _sizes(p)
    p.add_argument("--test", choices=["rank", "mp"], default="rank")
    _scores(p, required=False)
    _alpha(p)
    p.add_argument("--a", type=_positive_float, required=True)
    p.add_argument("--mp-a", type=_positive_float, default=None, help="design alternative of the MP test (default --a)")
    p.add_argument("--conservative", action="store_true")
    _parallel(p)

    p = add("power-mc", "Monte Carlo power")
    _sizes(p)
    p.add_argument("--test", choices=MC_TESTS, default="rank")
    _scores(p, required=False)
    _alpha(p)
    alt = p.add_mutually_exclusive_group(required=True)
    alt.add_argument("--a", type=_positive_float, help="Lehmann exponent")
    alt.add_argument("--shift", type=float, help="location shift theta")
    alt.add_argument("--c", type=_positive_float, help="local shift c / sqrt(n)")
    p.add_argument("--family", choices=FAMILY_CHOICES, default=None)
    p.add_argument("--mp-a", type=_positive_float, default=None)
    p.add_argument("--n-perm", type=_positive_int, default=999)
    p.add_argument("--conservative", action="store_true")
    _mc(p)

    p = add("mp-test", "most powerful rank test against (F, F^a)")
    _sizes(p)
    p.add_argument("--a", type=_positive_float, required=True)
    _alpha(p)
    p.add_argument("--conservative", action="store_true")

    p = add("lmp-scores", "locally most powerful (Savage) scores")
    _sizes(p)

    p = add("are", "asymptotic relative efficiency of A with respect to B")
    _expansions(p)

    p = add("deficiency-expansion", "deficiency curve and its sqrt(n) fit")
    _expansions(p)
    p.add_argument("--n-grid", type=_float_list, required=True)

    p = add("deficiency-mc", "empirical sample-size matching of B to A")
    p.add_argument("--test-a", type=_test_name, required=True)
    p.add_argument("--test-b", type=_test_name, required=True)
    _alpha(p, required=False)
    p.add_argument("--c", type=_positive_float, required=True)
    p.add_argument("--family", choices=FAMILY_CHOICES, default="normal")
    p.add_argument("--n-grid", type=_int_list, required=True)
    p.add_argument("--n-perm", type=_positive_int, default=999)
    p.add_argument("--no-smooth", action="store_true")
    _mc(p)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("RANKPOWER_THREADS")
    if env:
        try:
            v = int(env)
        except ValueError:
            raise UsageError(f"RANKPOWER_THREADS must be a positive integer, got {env!r}")
        if v < 1:
            raise UsageError("RANKPOWER_THREADS must be a positive integer")
        return v
    return 1


def _chunk(args, default: int) -> int:
    return args.chunk_size if args.chunk_size is not None else default


def _sizes_of(args) -> SampleSizes:
    return SampleSizes(args.m, args.n)


def _num(x: float) -> float | int:
    return int(x) if float(x).is_integer() and abs(x) < 2**53 else float(x)


def _fraction_str(fr: Fraction) -> str:
    return f"{fr.numerator}/{fr.denominator}"


def _expansion_pair(args) -> tuple[Any, Any]:
    if args.coeffs and args.efficacy:
        raise UsageError("give either --coeffs twice or --efficacy, not both")
    if args.efficacy:
        return (
            asymptotics.GaussianLocalPower(args.efficacy[0], args.alpha),
            asymptotics.GaussianLocalPower(args.efficacy[1], args.alpha),
        )
    if not args.coeffs or len(args.coeffs) != 2:
        raise UsageError("need --coeffs FILE_A --coeffs FILE_B or --efficacy EA EB")
    try:
        return tuple(asymptotics.PowerExpansion.from_csv(path) for path in args.coeffs)
    except OSError as exc:
        raise UsageError(f"cannot read coefficient table: {exc}")


def _rank_or_comparator(name: str, args) -> simulate.AnyTest:
    if name in SCORE_CHOICES:
        return simulate.RankTest(name, args.alpha)
    family = DistributionFamily(args.family) if name == "perm-score" else None
    return simulate.ComparatorTest(name, args.alpha, family=family, n_perm=args.n_perm)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_null_dist(args) -> list[dict]:
    sizes = _sizes_of(args)
    scores = score_vector(args.scores, sizes.N)
    pmf = exact.null_pmf(scores, sizes, chunk_size=_chunk(args, exact.DEFAULT_CHUNK), threads=_threads(args))
    rows = []
    for i, (t, p) in enumerate(zip(pmf.support, pmf.probs)):
        row = {"t": _num(t), "prob": float(p)}
        if pmf.exact is not None:
            row["prob_exact"] = _fraction_str(pmf.exact[i])
        rows.append(row)
    return rows


def cmd_critical(args) -> list[dict]:
    sizes = _sizes_of(args)
    test = exact.critical_value(score_vector(args.scores, sizes.N), sizes, args.alpha, conservative=args.conservative)
    return [{"threshold": _num(test.threshold), "gamma": test.gamma, "size": test.size, "alpha": args.alpha}]


def cmd_prob_rankset(args) -> list[dict]:
    sizes = _sizes_of(args)
    try:
        r = RankSet(tuple(args.ranks), sizes)
    except ValueError as exc:
        raise UsageError(str(exc))
    return [{"ranks": " ".join(map(str, r.ranks)), "a": args.a, "prob": exact.rankset_prob_lehmann(r, args.a)}]


def _exact_test(args, sizes: SampleSizes):
    if args.test == "mp":
        design = args.mp_a if args.mp_a is not None else args.a
        if design == 1:
            raise UsageError("the MP test needs a design alternative a != 1 (use --mp-a)")
        return exact.mp_test(sizes, design, args.alpha, conservative=args.conservative)
    scores = score_vector(args.scores, sizes.N)
    return exact.critical_value(scores, sizes, args.alpha, conservative=args.conservative)


def cmd_power_exact(args) -> list[dict]:
    sizes = _sizes_of(args)
    test = _exact_test(args, sizes)
    power = exact.exact_power(test, args.a, chunk_size=_chunk(args, exact.DEFAULT_CHUNK), threads=_threads(args))
    return [{"test": test.name, "a": args.a, "power": power, "size": test.size, "gamma": test.gamma}]


def _alternative(args):
    fam = DistributionFamily(args.family) if args.family else None
    if args.a is not None:
        return Lehmann(args.a), fam
    fam = fam or DistributionFamily.NORMAL
    if args.shift is not None:
        return Shift(args.shift, fam), fam
    return Local(args.c, fam), fam


def cmd_power_mc(args) -> list[dict]:
    sizes = _sizes_of(args)
    alt, fam = _alternative(args)
    if args.test == "rank":
        test = simulate.RankTest(args.scores, args.alpha, args.conservative)
    elif args.test == "mp":
        design = args.mp_a if args.mp_a is not None else getattr(alt, "a", None)
        if design is None or design == 1:
            raise UsageError("the MP test needs --mp-a (a design exponent != 1)")
        test = exact.mp_test(sizes, design, args.alpha, conservative=args.conservative)
    else:
        if args.test == "perm-score" and fam is None:
            raise UsageError("perm-score needs --family")
        test = simulate.ComparatorTest(args.test, args.alpha, family=fam if args.test == "perm-score" else None, n_perm=args.n_perm)
    spec = simulate.RngSpec(args.seed, _chunk(args, 10_000))
    est = simulate.power_mc(test, sizes, alt, fam, reps=args.reps, rng=spec, threads=_threads(args))
    return [
        {
            "test": est.test,
            "estimate": est.estimate,
            "std_error": est.std_error,
            "rejections": est.rejections,
            "reps": est.reps,
            "seed": args.seed,
        }
    ]


def cmd_mp_test(args) -> list[dict]:
    sizes = _sizes_of(args)
    if args.a == 1:
        raise UsageError("--a must differ from 1")
    test = exact.mp_test(sizes, args.a, args.alpha, conservative=args.conservative)
    rows = []
    for r, phi in sorted(test.rejection_table().items()):
        rows.append(
            {
                "ranks": " ".join(map(str, r)),
                "reject_prob": phi,
                "prob_alt": exact.rankset_prob_lehmann(RankSet(r, sizes), args.a),
                "size": test.size,
            }
        )
    return rows


def cmd_lmp_scores(args) -> list[dict]:
    sizes = _sizes_of(args)
    v = exact.lmp_scores(sizes.N).values
    return [{"rank": i + 1, "score": float(s)} for i, s in enumerate(v)]


def cmd_are(args) -> list[dict]:
    A, B = _expansion_pair(args)
    return [{"c": args.c, "are": asymptotics.are(A, B, args.c)}]


def cmd_deficiency_expansion(args) -> list[dict]:
    A, B = _expansion_pair(args)
    fit = asymptotics.deficiency_curve(A, B, args.c, args.n_grid)
    h1_closed = asymptotics.deficiency_leading_coeff(A, B, args.c)
    rows = []
    for pt in fit.points:
        rows.append(
            {
                "n": pt.n,
                "k": pt.k,
                "d": pt.d,
                "error": pt.error or "",
                "h1": fit.h1,
                "h2": fit.h2,
                "residual": fit.residual,
                "h1_closed_form": h1_closed,
            }
        )
    return rows


def cmd_deficiency_mc(args) -> list[dict]:
    test_a = _rank_or_comparator(args.test_a, args)
    test_b = _rank_or_comparator(args.test_b, args)
    spec = simulate.RngSpec(args.seed, _chunk(args, 10_000))
    out = simulate.matched_sample_size(
        test_b,
        test_a,
        args.n_grid,
        Local(args.c, DistributionFamily(args.family)),
        rng=spec,
        reps=args.reps,
        threads=_threads(args),
        smooth=not args.no_smooth,
    )
    return [
        {
            "n": r.n,
            "k": r.k,
            "d": r.d,
            "target": r.target,
            "power_at_k": r.power_at_k,
            "std_error": r.std_error,
            "within_noise": r.within_noise,
            "k_resolution": r.k_resolution,
            "reps": args.reps,
            "seed": args.seed,
        }
        for r in out
    ]


COMMANDS: dict[str, Callable[[argparse.Namespace], list[dict]]] = {
    "null-dist": cmd_null_dist,
    "critical": cmd_critical,
    "prob-rankset": cmd_prob_rankset,
    "power-exact": cmd_power_exact,
    "power-mc": cmd_power_mc,
    "mp-test": cmd_mp_test,
    "lmp-scores": cmd_lmp_scores,
    "are": cmd_are,
    "deficiency-expansion": cmd_deficiency_expansion,
    "deficiency-mc": cmd_deficiency_mc,
}
STOCHASTIC = {"power-mc", "deficiency-mc"}


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _plain(v: Any) -> Any:
    """Python scalars only, so both encoders print the same shortest repr."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(record: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(record, allow_nan=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if "error" in record:
        writer.writerow(["error", "message"])
        writer.writerow([record["error"]["name"], record["error"]["message"]])
        return buf.getvalue()
    rows = record["results"]
    cols: list[str] = []
    for row in rows:
        cols.extend(k for k in row if k not in cols)
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row.get(k, "")) for k in cols])
    return buf.getvalue()


def _params(args) -> dict:
    skip = {"command", "format"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = _plain(v)
    if "threads" in out:
        out["threads"] = _threads(args)
    return out


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if any(a in ("-h", "--help") for a in argv):
        try:
            parser.parse_args(argv)
        except SystemExit as exc:  # help was printed
            return int(exc.code or 0)
    try:
        args = parser.parse_args(argv)
        fmt = args.format
        record: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "command": args.command,
            "params": _params(args),
        }
        if args.command in STOCHASTIC:
            record["seed"] = args.seed
        try:
            rows = COMMANDS[args.command](args)
            record["results"] = [{k: _plain(v) for k, v in row.items()} for row in rows]
            code = 0
        except RankPowerError as exc:
            record["error"] = {"name": type(exc).__name__, "message": str(exc)}
            print(f"rankpower: {type(exc).__name__}: {exc}", file=stderr)
            code = 3
    except UsageError as exc:
        print(str(exc), file=stderr)
        return 2
    except ValueError as exc:
        print(f"rankpower: invalid input: {exc}", file=stderr)
        return 2
    stdout.write(render(record, fmt))
    return code


def main() -> None:
    sys.exit(run())
