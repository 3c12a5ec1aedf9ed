"""
Command-line front end.

    sparsecard solve INSTANCE [--eps E] [--scale S] [--json-out PATH] [--csv]
    sparsecard reduce INSTANCE [--eps E] [--dimacs-out PATH]
    sparsecard curve SPEC K [--eps-list 1,0.1,0.01]
    sparsecard oracle INSTANCE
    sparsecard sweep INSTANCE [--eps-list ...]
    sparsecard maxflow DIMACS

Exit codes: 0 success, 1 internal error, 2 invalid input, 3 size guard.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from typing import List, Optional, Sequence

from tabulate import tabulate

from .dsfm import DEFAULT_EPS_GRID, SWEEP_HEADERS, SolveOptions, brute_force, build_reduction, sparse_card, sweep
from .errors import SizeGuardError, SparseCardError, ValidationError
from .flow import min_st_cut, read_dimacs, write_dimacs
from .formats import (
    SUMMARY_HEADERS,
    oracle_document,
    parse_instance,
    parse_penalty,
    solution_document,
    summary_row,
)
from .penalties import penalty_sequence
from .plcover import greedy_pl_cover, piece_count_bound

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2
EXIT_SIZE_GUARD = 3

_CURVE_SHOWN = 8


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as f:
        return f.read()


def _eps_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values or any(v < 0 or not math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f"eps values must be finite and nonnegative, got {text!r}")
    return values


def _options(args) -> SolveOptions:
    return SolveOptions(
        scale=args.scale,
        force_asymmetric=args.force_asymmetric,
        workers=args.workers,
        auto_shift=args.auto_shift,
        tighten_certificate=not args.no_tighten,
    )


def _emit_document(doc: dict, args, out) -> None:
    if args.csv:
        writer = csv.writer(out)
        writer.writerow(SUMMARY_HEADERS)
        writer.writerow(summary_row(doc))
    text = json.dumps(doc, indent=2)
    if args.json_out:
        with open(args.json_out, "w") as f:
            f.write(text + "\n")
    elif not args.csv:
        out.write(text + "\n")


# -----------------------------------------------------------------------------
# Commands


def cmd_solve(args, out) -> int:
    inst = parse_instance(_read_text(args.instance))
    sol = sparse_card(inst, args.eps, _options(args))
    _emit_document(solution_document(sol), args, out)
    return EXIT_OK


def cmd_reduce(args, out) -> int:
    inst = parse_instance(_read_text(args.instance))
    reduction = build_reduction(inst, args.eps, _options(args))
    if args.dimacs_out:
        with open(args.dimacs_out, "w") as f:
            write_dimacs(reduction.network, f)
    else:
        write_dimacs(reduction.network, out)
    logger.info("reduced network: %s", str(reduction.network).replace("\n", " "))
    return EXIT_OK


def _shorten(values: Sequence[float], full: bool) -> str:
    shown = values if full else values[:_CURVE_SHOWN]
    text = ",".join(f"{v:.6g}" for v in shown)
    if len(shown) < len(values):
        text += f",... ({len(values)} total)"
    return text


def cmd_curve(args, out) -> int:
    penalty = parse_penalty(args.spec)
    if args.k < 1:
        raise ValidationError(f"k must be positive, got {args.k}")
    g = penalty_sequence(penalty, args.k)
    rows = []
    for eps in args.eps_list:
        pl = greedy_pl_cover(g, eps)
        rows.append([
            eps, pl.num_pieces, piece_count_bound(args.k, eps),
            _shorten(pl.breakpoints, args.full), _shorten(pl.slopes, args.full),
        ])
    headers = ["eps", "pieces", "bound", "breakpoints", "slopes"]
    if args.csv:
        writer = csv.writer(out)
        writer.writerow(headers)
        writer.writerows(rows)
    else:
        out.write(tabulate(rows, headers=headers, tablefmt="simple") + "\n")
    return EXIT_OK


def cmd_oracle(args, out) -> int:
    inst = parse_instance(_read_text(args.instance))
    started = time.perf_counter()
    members, value = brute_force(inst)
    elapsed = (time.perf_counter() - started) * 1000.0
    _emit_document(oracle_document(members, value, elapsed), args, out)
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    inst = parse_instance(_read_text(args.instance))
    rows = [row.as_row() for row in sweep(inst, args.eps_list, _options(args))]
    if args.csv:
        writer = csv.writer(out)
        writer.writerow(SWEEP_HEADERS)
        writer.writerows(rows)
    else:
        out.write(tabulate(rows, headers=SWEEP_HEADERS, tablefmt="simple", floatfmt=".6g") + "\n")
    return EXIT_OK


def cmd_maxflow(args, out) -> int:
    net = read_dimacs(io.StringIO(_read_text(args.dimacs)))
    cut = min_st_cut(net)
    out.write(f"cut_value_scaled {cut.cut_value_scaled}\n")
    out.write(f"cut_value {cut.cut_value!r}\n")
    out.write(f"scale {net.scale}\n")
    return EXIT_OK


# -----------------------------------------------------------------------------
# Parser


def _add_solver_flags(p: argparse.ArgumentParser, with_eps: bool = True) -> None:
    if with_eps:
        p.add_argument("--eps", type=float, default=0.0, help="Cover accuracy (default 0: exact reduction)")
    p.add_argument("--scale", type=int, default=None,
                   help="Fixed-point capacity multiplier (default: $SPARSECARD_SCALE or 10^6)")
    p.add_argument("--force-asymmetric", action="store_true", help="Never use the symmetric gadget path")
    p.add_argument("--workers", type=int, default=1, help="Threads used to build component gadgets")
    p.add_argument("--auto-shift", action="store_true", help="Lift negative explicit penalties instead of failing")
    p.add_argument("--no-tighten", action="store_true", help="Report only the baseline (1+eps) certificate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsecard",
        description="Sparse graph reductions for cardinality-based decomposable submodular minimization.",
    )
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="Solve an instance through its sparse reduction")
    p.add_argument("instance", help="Instance file ('-' for stdin)")
    _add_solver_flags(p)
    p.add_argument("--json-out", help="Write the result document here instead of stdout")
    p.add_argument("--csv", action="store_true", help="Print a one-row CSV summary")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("reduce", help="Export the reduced network in DIMACS max-flow format")
    p.add_argument("instance")
    _add_solver_flags(p)
    p.add_argument("--dimacs-out", help="Output path (default stdout)")
    p.set_defaults(handler=cmd_reduce)

    p = sub.add_parser("curve", help="Piece counts of the greedy cover of one penalty")
    p.add_argument("spec", help="Penalty spec, e.g. clique or pow(0.5)")
    p.add_argument("k", type=int)
    p.add_argument("--eps-list", type=_eps_list, default=[1.0, 0.1, 0.01])
    p.add_argument("--full", action="store_true", help="Print every breakpoint and slope")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(handler=cmd_curve)

    p = sub.add_parser("oracle", help="Exhaustive minimum (n <= 24)")
    p.add_argument("instance")
    p.add_argument("--json-out")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("sweep", help="Sparsity and certified accuracy along an eps grid")
    p.add_argument("instance")
    _add_solver_flags(p, with_eps=False)
    p.add_argument("--eps-list", type=_eps_list, default=list(DEFAULT_EPS_GRID))
    p.add_argument("--csv", action="store_true")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("maxflow", help="Minimum cut of a DIMACS max-flow file")
    p.add_argument("dimacs")
    p.set_defaults(handler=cmd_maxflow)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    out = out if out is not None else sys.stdout

    try:
        return args.handler(args, out)
    except (ValidationError, OSError) as e:
        print(f"sparsecard: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SizeGuardError as e:
        print(f"sparsecard: size guard: {e}", file=sys.stderr)
        return EXIT_SIZE_GUARD
    except SparseCardError as e:
        print(f"sparsecard: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        logger.exception("unexpected failure")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
