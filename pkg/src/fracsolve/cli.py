"""Command-line interface: ``fracsolve {solve,bench,order,rmsd}``.

Exit codes: 0 success, 1 solver divergence, 2 usage error or unknown model.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from fracsolve.bench import (
    NORMS,
    bench_records_csv,
    estimate_orders,
    format_float,
    parse_compartments,
    read_series_csv,
    rmsd_against_data,
    run_bench,
    solution_csv,
)
from fracsolve.convolution import ConvPlan
from fracsolve.core import SolverConfig
from fracsolve.errors import (
    Diverged,
    FracSolveError,
    LengthMismatch,
    NoExactSolution,
    SingularMatrix,
    UnknownModel,
)
from fracsolve.models import MODELS, ModelSpec, get_model
from fracsolve.solvers import solve

log = logging.getLogger("fracsolve")

EXIT_OK = 0
EXIT_DIVERGED = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _parse_number(text: str) -> float:
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return float(base) ** float(exp)
    return float(text)


def _number_list(text: str) -> list[float]:
    try:
        return [_parse_number(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def _span(text: str) -> tuple[float, float]:
    values = _number_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError("--tspan takes two numbers: a,b")
    return values[0], values[1]


def _param(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), _parse_number(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help=f"one of {', '.join(MODELS)}")
    common.add_argument("--nc", type=int, help="corrector sweeps (PC)")
    common.add_argument("--tol", type=float, help="iteration tolerance")
    common.add_argument("--itmax", type=int, help="Newton iteration cap")
    common.add_argument("--beta", type=_number_list, help="orders, comma separated")
    common.add_argument("--tspan", type=_span, help="time span a,b")
    common.add_argument(
        "--param", type=_param, action="append", default=[], help="NAME=VALUE override"
    )
    common.add_argument("--fft", choices=("on", "off"), default="on")
    common.add_argument("--out", help="write output to this path instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fracsolve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one model, print CSV")
    p.add_argument("--method", choices=("pc", "nr"))
    p.add_argument("--h", type=_parse_number, help="step size")

    p = sub.add_parser("bench", parents=[common], help="error versus time table")
    p.add_argument("--method", type=lambda s: s.split(","), default=["pc", "nr"])
    p.add_argument("--h", type=_number_list, default=[2.0**-k for k in range(3, 9)])
    p.add_argument("--reference", choices=("exact", "fine"), default="exact")
    p.add_argument("--repeats", type=int, default=5)

    p = sub.add_parser("order", parents=[common], help="observed convergence orders")
    p.add_argument("--method", choices=("pc", "nr"), default="nr")
    p.add_argument("--h", type=_number_list, default=[2.0**-k for k in range(5, 9)])
    p.add_argument("--norm", choices=NORMS, default="max")

    p = sub.add_parser("rmsd", parents=[common], help="RMSD against a data series")
    p.add_argument("--method", choices=("pc", "nr"))
    p.add_argument("--h", type=_parse_number, default=2.0**-6)
    p.add_argument("--data", required=True, help="two-column CSV with header")
    p.add_argument(
        "--compartments", required=True, help="sum of columns, e.g. x3+x4+x6 or I+P+H"
    )
    return parser


def _setup(args) -> tuple[ModelSpec, object, SolverConfig, ConvPlan]:
    model = get_model(args.model)
    try:
        params = model.override_params(dict(args.param))
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    problem = model.problem(beta=args.beta, params=params, t_span=args.tspan)
    base = model.default_config
    h = args.h if isinstance(getattr(args, "h", None), float) else base.h
    config = SolverConfig(
        h=h,
        nc=args.nc if args.nc is not None else base.nc,
        tol=args.tol if args.tol is not None else base.tol,
        itmax=args.itmax if args.itmax is not None else base.itmax,
    )
    return model, problem, config, ConvPlan(mode=args.fft)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    _, problem, config, plan = _setup(args)
    sol = solve(problem, config, plan, method=args.method)
    _emit(solution_csv(sol.t, sol.x), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    model, problem, config, plan = _setup(args)
    records = run_bench(
        model,
        args.method,
        args.h,
        reference=args.reference,
        config=config,
        problem=problem,
        plan=plan,
        repeats=args.repeats,
    )
    _emit(bench_records_csv(records), args.out)
    return EXIT_OK


def cmd_order(args) -> int:
    model, problem, config, plan = _setup(args)
    est = estimate_orders(
        model, args.method, args.h, config, problem, norm=args.norm, plan=plan
    )
    lines = ["h,error,order"]
    for i, (h, err) in enumerate(zip(est.hs, est.errors)):
        order = format_float(est.orders[i - 1]) if i else ""
        lines.append(f"{format_float(h)},{format_float(err)},{order}")
    lines.append(f"# mean order {est.mean_order:.4f}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_rmsd(args) -> int:
    model, problem, config, plan = _setup(args)
    try:
        columns = parse_compartments(args.compartments, model.labels, problem.dim)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = read_series_csv(args.data)
    sol = solve(problem, config, plan, method=args.method)
    value = rmsd_against_data(sol, columns, data)
    _emit(format_float(value) + "\n", args.out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "order": cmd_order, "rmsd": cmd_rmsd}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except UnknownModel as exc:
        print(f"fracsolve: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (Diverged, SingularMatrix) as exc:
        print(f"fracsolve: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, NoExactSolution, LengthMismatch, FileNotFoundError) as exc:
        print(f"fracsolve: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FracSolveError, ValueError) as exc:
        print(f"fracsolve: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
