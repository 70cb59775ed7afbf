"""
HessCraft command-line interface.

    eval          print f(x)
    grad          print the gradient
    hess          write the Hessian (Matrix Market by default)
    bench         time benchmark families, CSV rows on stdout
    export-graph  write the tape, folded graph or sweep trace as DOT
    check         cross-validate edge pushing against the oracles on random tapes
    config        print the effective configuration

Only the requested artifact goes to stdout; [INFO]/[OK]/[WARNING]/[ERROR]
lines go to stderr. Exit codes: 0 success, 1 evaluation failure or check
mismatch, 2 usage error (bad flags, unknown family, n below a family
minimum, malformed tape file).
"""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from core.config import get_config
from core.errors import DimensionError, HessCraftError, TapeError, UnknownFamilyError

SUBCOMMANDS = ("eval", "grad", "hess", "bench", "export-graph", "check", "config")


class UsageError(Exception):
    """Bad flag combination detected after argparse."""


def _info(message: str, quiet: bool = False) -> None:
    if not quiet:
        print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _non_negative(text: str) -> float:
    value = float(text)
    if not value >= 0.0:
        raise argparse.ArgumentTypeError(f"expected a real >= 0, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_function_args(parser: argparse.ArgumentParser) -> None:
    source = parser.add_argument_group("function")
    source.add_argument("--function", metavar="FAMILY", help="Benchmark family name")
    source.add_argument("--n", type=_positive_int, help="Dimension for --function")
    source.add_argument("--tape", metavar="FILE", help="Serialized tape file instead of --function")

    point = parser.add_argument_group("point").add_mutually_exclusive_group()
    point.add_argument("--x-file", metavar="FILE", help="Whitespace-separated reals")
    point.add_argument("--x-const", type=float, metavar="V", help="Every coordinate equal to V (default 1.0)")
    point.add_argument("--x-seed", type=int, metavar="S", help="Uniform in [0.5, 1.5] seeded by S")


def _add_output_args(parser: argparse.ArgumentParser, formats: Sequence[str], default: str) -> None:
    parser.add_argument("--format", choices=formats, default=default, help=f"Output format (default {default})")
    parser.add_argument("--output", "-o", metavar="FILE", help="Write to FILE instead of stdout")
    parser.add_argument("--quiet", "-q", action="store_true", help="No diagnostics or progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hesscraft",
        description="Sparse Hessians of recorded scalar functions by edge pushing",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")

    p = sub.add_parser("eval", help="Print f(x)")
    _add_function_args(p)
    _add_output_args(p, ("plain",), "plain")

    p = sub.add_parser("grad", help="Print the gradient")
    _add_function_args(p)
    _add_output_args(p, ("plain", "csv"), "plain")

    p = sub.add_parser("hess", help="Write the Hessian")
    _add_function_args(p)
    _add_output_args(p, ("mm", "csv", "plain"), "mm")
    p.add_argument("--drop-tol", type=_non_negative, help="Drop entries with |h| below this (default from config)")
    p.add_argument(
        "--method",
        choices=("edge-pushing", "nested", "fd", "paths", "pattern"),
        default="edge-pushing",
        help="Hessian driver or oracle",
    )

    p = sub.add_parser("bench", help="Time benchmark families")
    from bench.runner import PHASES

    p.add_argument("--function", nargs="+", metavar="FAMILY", help="Families to time (default all)")
    p.add_argument("--n", nargs="+", type=_positive_int, required=True, help="Dimensions")
    p.add_argument("--repeats", type=_positive_int, help="Timed runs per measurement (default from config)")
    p.add_argument("--phase", choices=PHASES + ("all",), default="hessian-only")
    p.add_argument("--seed", type=int, default=0, help="Seed of the evaluation point")
    _add_output_args(p, ("csv",), "csv")

    p = sub.add_parser("export-graph", help="Write a graph as DOT")
    _add_function_args(p)
    _add_output_args(p, ("dot",), "dot")
    p.add_argument("--graph", choices=("tape", "folded", "snapshots"), default="folded")
    p.add_argument("--keep-pushed", action="store_true", help="Keep pushed arcs in sweep snapshots")

    p = sub.add_parser("check", help="Cross-validate against the oracles")
    p.add_argument("--trials", type=_positive_int, help="Random tapes (default from config)")
    p.add_argument("--max-n", type=_positive_int, help="Largest n (default from config)")
    p.add_argument("--max-ell", type=_positive_int, help="Largest l (default from config)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", "-q", action="store_true")

    sub.add_parser("config", help="Print the effective configuration")
    return parser


# ---------------------------------------------------------------------------
# Inputs and outputs
# ---------------------------------------------------------------------------


def load_function(args: argparse.Namespace):
    from core.tape import loads

    if args.tape and args.function:
        raise UsageError("use either --tape or --function, not both")
    if args.tape:
        try:
            text = Path(args.tape).read_text(encoding="utf-8")
        except OSError as e:
            raise UsageError(f"cannot read tape file: {e}") from None
        return loads(text)
    if not args.function:
        raise UsageError("one of --function or --tape is required")
    if args.n is None:
        raise UsageError("--function needs --n")
    from bench.family_manager import make_family

    return make_family(args.function, args.n)


def load_point(args: argparse.Namespace, n: int) -> np.ndarray:
    if args.x_file:
        try:
            tokens = Path(args.x_file).read_text(encoding="utf-8").split()
            x = np.array([float(t) for t in tokens])
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot read point file: {e}") from None
    elif args.x_seed is not None:
        from bench.runner import bench_point

        x = bench_point(n, args.x_seed)
    else:
        x = np.full(n, 1.0 if args.x_const is None else args.x_const)
    if x.shape != (n,):
        raise UsageError(f"point has {x.size} coordinates, function has n={n}")
    return x


def emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    from core.tape import forward_sweep
    from utils.formatting import format_real

    tape = load_function(args)
    swept = forward_sweep(tape, load_point(args, tape.n))
    emit(format_real(swept.function_value) + "\n", args.output)
    return 0


def cmd_grad(args: argparse.Namespace) -> int:
    from core.reverse_gradient import reverse_gradient
    from core.tape import forward_sweep
    from utils.formatting import format_vector

    tape = load_function(args)
    grad, _ = reverse_gradient(forward_sweep(tape, load_point(args, tape.n)))
    sep = "," if args.format == "csv" else " "
    emit(format_vector(grad, sep) + "\n", args.output)
    return 0


def compute_hessian(tape, x: np.ndarray, method: str, drop_tol: float):
    from core.edge_pushing import edge_pushing_hessian, structural_pattern
    from core.tape import forward_sweep

    if method == "pattern":
        return structural_pattern(tape)
    if method == "fd":
        from core.oracles import fd_hessian

        return fd_hessian(tape, x).drop(drop_tol)
    swept = forward_sweep(tape, x)
    if method == "nested":
        from core.oracles import dense_hessian_nested

        return dense_hessian_nested(swept).drop(drop_tol)
    if method == "paths":
        from core.graph_model import build_folded_graph, path_enumeration_hessian
        from core.reverse_gradient import reverse_gradient

        _, adjoints = reverse_gradient(swept)
        return path_enumeration_hessian(build_folded_graph(swept, adjoints)).drop(drop_tol)
    hessian, _ = edge_pushing_hessian(swept, drop_tol=drop_tol)
    return hessian


def render_hessian(hessian, fmt: str) -> str:
    from utils.formatting import format_real

    if fmt == "mm":
        return hessian.matrix_market()
    buffer = io.StringIO()
    if fmt == "csv":
        buffer.write("row,col,value\n")
        for r, c, v in hessian.entries:
            buffer.write(f"{r},{c},{format_real(v)}\n")
    else:
        for r, c, v in hessian.entries:
            buffer.write(f"{r} {c} {format_real(v)}\n")
    return buffer.getvalue()


def cmd_hess(args: argparse.Namespace) -> int:
    from utils.formatting import format_count

    tape = load_function(args)
    x = load_point(args, tape.n)
    drop_tol = get_config().get_drop_tol() if args.drop_tol is None else args.drop_tol
    hessian = compute_hessian(tape, x, args.method, drop_tol)
    emit(render_hessian(hessian, args.format), args.output)

    _info(f"[INFO] n={tape.n} l={tape.ell} nnz={format_count(hessian.nnz)}", args.quiet)
    if hessian.stats is not None:
        s = hessian.stats
        _info(
            f"[INFO] edges allocated={format_count(s.allocated_edges)} "
            f"peak live={format_count(s.peak_live_edges)} max degree={s.max_degree}",
            args.quiet,
        )
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    from bench.family_manager import get_family_manager
    from bench.runner import PHASES, run_benches, write_csv
    from utils.formatting import format_ns

    families = args.function or get_family_manager().names()
    for name in families:
        get_family_manager().get_family(name)
    phases = PHASES if args.phase == "all" else (args.phase,)
    records = run_benches(families, args.n, phases, args.repeats, args.seed, progress=not args.quiet)
    buffer = io.StringIO()
    write_csv(records, buffer)
    emit(buffer.getvalue(), args.output)
    for rec in records:
        _info(f"[INFO] {rec.family} n={rec.n} {rec.phase}: {format_ns(rec.median_ns)}", args.quiet)
    return 0


def cmd_export_graph(args: argparse.Namespace) -> int:
    from core.graph_model import DotOptions, build_folded_graph, export_dot, sweep_snapshots
    from core.reverse_gradient import reverse_gradient
    from core.tape import forward_sweep

    tape = load_function(args)
    x = load_point(args, tape.n)
    swept = forward_sweep(tape, x)
    if args.graph == "tape":
        text = export_dot(swept)
    elif args.graph == "folded":
        _, adjoints = reverse_gradient(swept)
        text = export_dot(build_folded_graph(swept, adjoints), DotOptions(name="folded"))
    else:
        snapshots = sweep_snapshots(swept, keep_pushed=args.keep_pushed)
        text = "".join(export_dot(s, DotOptions(name=f"after_{s.node_id}")) for s in snapshots)
    emit(text, args.output)
    return 0


@dataclass
class CheckReport:
    """Largest discrepancies seen by run_check, one per comparison."""

    trials: int = 0
    enumerated: int = 0
    max_nested: float = 0.0
    max_paths: float = 0.0
    max_fd: float = 0.0
    max_gradient: float = 0.0
    max_hvp: float = 0.0
    failures: List[str] = field(default_factory=list)

    def summary(self) -> str:
        return (
            f"trials={self.trials} enumerated={self.enumerated} "
            f"nested={self.max_nested:.3e} paths={self.max_paths:.3e} fd={self.max_fd:.3e} "
            f"gradient={self.max_gradient:.3e} hvp={self.max_hvp:.3e} failures={len(self.failures)}"
        )


CHECK_TOLERANCES = {"nested": 1e-9, "paths": 1e-9, "fd": 1e-4, "gradient": 1e-5, "hvp": 1e-10}


def run_check(trials: int, max_n: int, max_ell: int, seed: int = 0, progress: bool = False) -> CheckReport:
    """Compare edge pushing with every oracle on random safe tapes."""
    from core.edge_pushing import edge_pushing_hessian
    from core.graph_model import build_folded_graph, path_enumeration_hessian
    from core.oracles import (
        dense_hessian_nested,
        fd_gradient,
        fd_hessian,
        hessian_vector_product,
        relative_discrepancy,
    )
    from core.random_tapes import random_direction, random_tape
    from core.reverse_gradient import reverse_gradient
    from core.tape import forward_sweep

    rng = np.random.default_rng(seed)
    report = CheckReport()
    path_cap = get_config().get_path_enum_cap()

    for trial in tqdm(range(trials), desc="check", unit="tape", file=sys.stderr, disable=not progress):
        tape, x = random_tape(rng, max_n, max_ell)
        swept = forward_sweep(tape, x)
        hessian, adjoints = edge_pushing_hessian(swept, drop_tol=0.0, check_invariants=True)
        grad, reference = reverse_gradient(swept)
        if adjoints.vbar != reference.vbar:
            report.failures.append(f"trial {trial}: adjoints differ from reverse_gradient")

        errors = {
            "nested": relative_discrepancy(hessian, dense_hessian_nested(swept)),
            "fd": relative_discrepancy(hessian, fd_hessian(tape, x)),
            "gradient": relative_discrepancy(grad, fd_gradient(tape, x)),
        }
        d = random_direction(rng, tape.n)
        errors["hvp"] = relative_discrepancy(hessian_vector_product(swept, d), hessian.matvec(d))
        if tape.size <= path_cap:
            report.enumerated += 1
            errors["paths"] = relative_discrepancy(
                hessian, path_enumeration_hessian(build_folded_graph(swept, reference))
            )

        for name, err in errors.items():
            attr = f"max_{name}"
            setattr(report, attr, max(getattr(report, attr), err))
            if not err <= CHECK_TOLERANCES[name]:
                report.failures.append(f"trial {trial}: {name} discrepancy {err:.3e}")
        report.trials += 1
    return report


def cmd_check(args: argparse.Namespace) -> int:
    config = get_config()
    report = run_check(
        args.trials or config.get_check_trials(),
        args.max_n or config.get_check_max_n(),
        args.max_ell or config.get_check_max_ell(),
        args.seed,
        progress=not args.quiet,
    )
    print(report.summary())
    for failure in report.failures[:20]:
        print(f"[ERROR] {failure}", file=sys.stderr)
    if report.failures:
        return 1
    _info("[OK] all oracles agree", args.quiet)
    return 0


def cmd_config(args: argparse.Namespace) -> int:
    get_config().print_config()
    return 0


COMMANDS = {
    "eval": cmd_eval,
    "grad": cmd_grad,
    "hess": cmd_hess,
    "bench": cmd_bench,
    "export-graph": cmd_export_graph,
    "check": cmd_check,
    "config": cmd_config,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return COMMANDS[args.command](args)
    except (UsageError, UnknownFamilyError, DimensionError, TapeError) as e:
        parser.print_usage(sys.stderr)
        print(f"[ERROR] {e}", file=sys.stderr)
        return 2
    except HessCraftError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
