"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 mathematical precondition
failed, 4 numerical non-convergence.  Errors are reported as one JSON line
on standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import acceptance
from .errors import GroupKernelError, ValidationError
from .experiments import (
    COLUMNS,
    COMMANDS,
    DEFAULT_TOLERANCES,
    OUTPUT_ENV,
    ExperimentSpec,
    atomic_write,
    csv_text,
    execute,
    output_prefix,
)

_COMMAND_TABLES = {
    "growth": ["growth"],
    "norms": ["norms", "norms_trace"],
    "schur": ["schur"],
    "truncate": ["truncate"],
    "powers": ["powers"],
    "invert": ["invert", "invert_decay"],
    "suite": ["manifest", "suite_data"],
}

_HELP = {
    "growth": "ball sizes and growth-degree fit",
    "norms": "weighted norms and finite-section operator norm",
    "schur": "check ||T||_2 <= C0 ||T||_a",
    "truncate": "truncation error against its bound",
    "powers": "weighted norms of kernel powers",
    "invert": "Neumann-series inversion on a window or a window schedule",
    "suite": "run the acceptance matrix",
}


def columns_epilog(commands=COMMANDS) -> str:
    lines = ["CSV columns:"]
    for cmd in commands:
        for table in _COMMAND_TABLES[cmd]:
            lines.append(f"  <prefix>_{table}.csv")
            for col, doc in COLUMNS[table]:
                lines.append(f"      {col:15s} {doc}")
    lines.append("")
    lines.append(f"Output prefix defaults to ${OUTPUT_ENV}/groupkernels (or ./groupkernels).")
    lines.append("Exit codes: 0 ok, 2 invalid input, 3 precondition failed, 4 no convergence.")
    return "\n".join(lines)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _window(text: str):
    try:
        parts = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or comma-separated schedule, got {text!r}") from None
    return parts[0] if len(parts) == 1 else parts


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(
        prog="groupkernels",
        description="Weighted kernel algebras on finitely generated groups.",
        epilog=columns_epilog(),
        formatter_class=fmt,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    common = _Parser(add_help=False)
    opt = common.add_argument
    opt("--config", help="JSON experiment spec; explicit flags override its fields")
    opt("--group", help="Z^d, H3 or Fk (default Z^1)")
    opt("--coeff-dim", type=int, help="coefficient dimension d (default 2)")
    opt("--a", type=float, help="weight exponent for single-weight commands")
    opt("--weights", type=_floats, help="comma-separated weight grid (default 1,2,3)")
    opt("--kernel", help='kernel expression, e.g. "I+0.4*shift" or "random(4,4,0)"')
    opt("--kernel-file", help="kernel in the JSON interchange format")
    opt("--window", type=_window, help="window radius, or a comma-separated schedule for invert")
    opt("--rmax", type=int, help="largest radius (growth) or Schur series cutoff")
    opt("--n-max", type=int, help="largest power for the powers command (default 6)")
    opt("--r", type=float, help="extra smoothness in the truncation bound (default 2)")
    opt("--tol-norm", type=float, help=f"power-iteration tolerance (default {DEFAULT_TOLERANCES['norm']:g})")
    opt("--tol-neumann", type=float, help=f"Neumann tolerance (default {DEFAULT_TOLERANCES['neumann']:g})")
    opt("--output", help="output path prefix")
    opt("--svg", action="store_true", default=None, help="also write SVG figures")
    opt("--save-inverse", action="store_true", default=None, help="invert: write the last inverse as JSON")
    opt("--quick", action="store_true", default=None, help="suite: reduced sample counts")
    opt("--print-spec", action="store_true", help="print the resolved spec as JSON and exit")
    opt("--inject-fault", help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        sub.add_parser(
            cmd, parents=[common], help=_HELP[cmd], description=_HELP[cmd],
            epilog=columns_epilog([cmd]), formatter_class=fmt,
        )
    return parser


_FLAG_FIELDS = {
    "group": "group",
    "coeff_dim": "coeff_dim",
    "a": "a",
    "weights": "weight_grid",
    "kernel": "kernel",
    "kernel_file": "kernel_file",
    "window": "window",
    "rmax": "rmax",
    "n_max": "n_max",
    "r": "r",
    "output": "output",
    "svg": "emit_svg",
    "save_inverse": "save_inverse",
    "quick": "quick",
}


def spec_from_args(args) -> ExperimentSpec:
    doc: dict = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
    doc["command"] = args.command
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag)
        if v is not None:
            doc[name] = v
    tols = dict(doc.get("tolerances", {}))
    if args.tol_norm is not None:
        tols["norm"] = args.tol_norm
    if args.tol_neumann is not None:
        tols["neumann"] = args.tol_neumann
    doc["tolerances"] = tols
    return ExperimentSpec.from_dict(doc)


def run_suite(spec: ExperimentSpec, fault: str | None = None) -> int:
    prefix = output_prefix(spec)
    results = acceptance.run_items(quick=spec.quick, fault=fault, progress=lambda r: print(r.line(), flush=True))
    atomic_write(prefix.with_name(f"{prefix.name}_manifest.csv"), csv_text("manifest", acceptance.manifest_rows(results)))
    atomic_write(prefix.with_name(f"{prefix.name}_suite_data.csv"), csv_text("suite_data", acceptance.data_rows(results)))
    atomic_write(prefix.with_name(f"{prefix.name}_manifest.json"), acceptance.manifest_json(results, spec.quick))
    failed = [r.item for r in results if not r.passed]
    total = sum(r.seconds for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} items passed in {total:.1f} s")
    if failed:
        print(f"failed items: {', '.join(map(str, failed))}")
        return 1
    return 0


def _report_error(exc: GroupKernelError) -> int:
    line = json.dumps({"error": exc.kind, "exit_code": exc.exit_code, "message": str(exc)})
    print(line, file=sys.stderr)
    return exc.exit_code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
        spec = spec_from_args(args)
        if args.print_spec:
            print(spec.to_json())
            return 0
        if spec.command == "suite":
            return run_suite(spec, args.inject_fault)
        out, written = execute(spec)
    except GroupKernelError as exc:
        return _report_error(exc)
    for line in out.summary:
        print(line)
    for p in written:
        print(f"wrote {p}")
    return out.exit_code


if __name__ == "__main__":
    sys.exit(main())
