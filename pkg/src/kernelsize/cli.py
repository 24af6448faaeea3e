"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 invalid spec, 3 infeasible constraint.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from kernelsize.errors import InfeasibleError, SpecError, UnresolvedKernelError
from kernelsize.objective import DEFAULT_CANDIDATES, DEFAULT_GAMMA, ObjectiveWeights
from kernelsize.optimizer import OptimizationConfig, optimize_network, profile_weights, sweep
from kernelsize.report import FORMATS, analyze, compare, emit_report, emit_spec, load_spec

EXIT_OK, EXIT_USAGE, EXIT_SPEC, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("kernelsize")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kernelsize", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def output_flags(p, default="text"):
        p.add_argument("--format", choices=FORMATS, default=default)
        p.add_argument("--out", type=Path, help="write the report here instead of stdout")

    p = sub.add_parser("analyze", help="shapes, receptive fields and costs of a spec")
    p.add_argument("spec", type=Path)
    p.add_argument("--bytes-per-weight", type=int, default=4)
    output_flags(p)

    p = sub.add_parser("optimize", help="choose kernels for FREE layers")
    p.add_argument("spec", type=Path)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--profile", help="weight preset: balanced, cloud, edge")
    group.add_argument("--weights", type=_floats, help="lambda1,lambda2,lambda3")
    p.add_argument("--profiles-file", type=Path, help="JSON object overriding weight presets")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--candidates", type=_ints, default=list(DEFAULT_CANDIDATES))
    p.add_argument("--budget-macs", type=int)
    p.add_argument("--rf-floor", type=int)
    p.add_argument("--accuracy-table", type=Path, help='JSON object {"k": accuracy, ...}')
    p.add_argument("--spec-out", type=Path, help="where to write the resolved descriptor")
    output_flags(p)

    p = sub.add_parser("compare", help="compare two concrete specs")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    output_flags(p)

    p = sub.add_parser("sweep", help="optimize over a grid of weights and gammas")
    p.add_argument("spec", type=Path)
    p.add_argument("--lambda-grid", type=Path, required=True,
                   help="JSON list of [l1, l2, l3] or one 'l1,l2,l3' per line")
    p.add_argument("--gamma-grid", type=_floats, default=[DEFAULT_GAMMA])
    p.add_argument("--candidates", type=_ints, default=list(DEFAULT_CANDIDATES))
    output_flags(p, default="csv")
    return parser


def read_lambda_grid(path: Path) -> list[list[float]]:
    text = path.read_text(encoding="utf-8")
    try:
        rows = json.loads(text)
    except json.JSONDecodeError:
        rows = [
            [float(x) for x in line.split(",")]
            for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")
        ]
    if not isinstance(rows, list) or not all(isinstance(r, list) and len(r) == 3 for r in rows):
        raise UsageError(f"{path}: lambda grid must be a list of [l1, l2, l3] rows")
    return rows


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: {exc}")


def _weights(args) -> ObjectiveWeights:
    if args.weights is not None:
        if len(args.weights) != 3:
            raise UsageError("--weights needs exactly three values")
        return ObjectiveWeights(*args.weights)
    overrides = _read_json(args.profiles_file) if args.profiles_file else None
    return profile_weights(args.profile or "balanced", overrides)


def _write(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")


def cmd_analyze(args) -> None:
    _write(args, emit_report(analyze(load_spec(args.spec), args.bytes_per_weight), args.format))


def cmd_optimize(args) -> None:
    spec = load_spec(args.spec)
    accuracy = None
    if args.accuracy_table:
        accuracy = {int(k): float(v) for k, v in _read_json(args.accuracy_table).items()}
    config = OptimizationConfig(
        candidates=tuple(args.candidates),
        weights=_weights(args),
        gamma=args.gamma,
        budget_macs=args.budget_macs,
        rf_floor=args.rf_floor,
        accuracy_table=accuracy,
    )
    result = optimize_network(spec, config)
    report = emit_report(result, args.format)
    descriptor = emit_spec(result.optimized_spec)

    spec_out = args.spec_out
    if spec_out is None and args.out is not None:
        spec_out = args.out.with_name(args.out.stem + ".resolved.json")
    if spec_out is not None:
        spec_out.write_text(descriptor, encoding="utf-8")
        log.info("resolved descriptor written to %s", spec_out)
    elif args.format == "text":
        report += "\nresolved descriptor:\n" + descriptor
    _write(args, report)


def cmd_compare(args) -> None:
    _write(args, emit_report(compare(load_spec(args.a), load_spec(args.b)), args.format))


def cmd_sweep(args) -> None:
    result = sweep(
        load_spec(args.spec),
        read_lambda_grid(args.lambda_grid),
        args.gamma_grid,
        tuple(args.candidates),
    )
    _write(args, emit_report(result, args.format))


COMMANDS = {
    "analyze": cmd_analyze,
    "optimize": cmd_optimize,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except (SpecError, UnresolvedKernelError) as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
