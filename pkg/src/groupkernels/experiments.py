"""Experiment specifications and the command runners behind the CLI.

Each runner turns an :class:`ExperimentSpec` into an :class:`Outcome`:
tables destined for CSV, a structured record destined for JSON, summary
lines for standard output and optional figures.  :func:`execute` writes those
artifacts atomically next to the configured output prefix.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import analysis, inversion, plotting
from .errors import ValidationError
from .groups import GroupModel, growth_analysis, parse_group
from .interchange import from_document, read_kernel, write_kernel
from .kernels import InvariantKernel, envelope, random_kernel, weighted_norm

COMMANDS = ("growth", "norms", "schur", "truncate", "powers", "invert", "suite")
OUTPUT_ENV = "GROUPKERNELS_OUTPUT_DIR"

DEFAULT_TOLERANCES = {"norm": 1e-10, "neumann": 1e-8}

#: Columns of every CSV file, keyed by file suffix.
COLUMNS: dict[str, list[tuple[str, str]]] = {
    "growth": [("r", "ball radius"), ("ball_size", "#B(e, r)")],
    "norms": [("a", "weight exponent"), ("weighted_norm", "||T||_a")],
    "norms_trace": [("radius", "window radius R"), ("norm_2_estimate", "largest singular value on B(e, R)")],
    "schur": [
        ("radius", "window radius R"),
        ("norm_2_estimate", "largest singular value on B(e, R)"),
        ("schur_rhs", "C0 * ||T||_a"),
        ("satisfied", "true when norm_2_estimate <= schur_rhs + 1e-9"),
    ],
    "truncate": [
        ("n", "truncation radius"),
        ("exact", "||T - T_n||_a"),
        ("bound", "(2 + n)^-r * ||T||_{a+r}"),
    ],
    "powers": [
        ("k", "power"),
        ("weighted_norm", "||T^k||_a"),
        ("excess", "log ||T^k||_a - k log ||T||_2"),
    ],
    "invert": [
        ("window_radius", "window radius R"),
        ("iteration", "partial-sum index k"),
        ("a", "weight exponent"),
        ("weighted_norm", "||S_k||_a of the Neumann partial sum"),
    ],
    "invert_decay": [
        ("window_radius", "window radius R"),
        ("word_length", "l(gamma)"),
        ("envelope", "largest envelope value of the inverse on the sphere of that length"),
    ],
    "manifest": [
        ("item", "acceptance item number"),
        ("name", "short item name"),
        ("passed", "true or false"),
        ("measured", "key measured values"),
        ("tolerance", "criterion being checked"),
    ],
    "suite_data": [
        ("item", "acceptance item number"),
        ("quantity", "name of the recorded series"),
        ("index", "radius, power, seed or length indexing the series"),
        ("value", "recorded value"),
    ],
}


@dataclass
class ExperimentSpec:
    """Configuration of one CLI run; only ``command`` and ``group`` are needed."""

    command: str
    group: str = "Z^1"
    coeff_dim: int = 2
    weight_grid: list[float] = field(default_factory=lambda: [1.0, 2.0, 3.0])
    a: float | None = None
    r: float = 2.0
    kernel: str | dict | None = None
    kernel_file: str | None = None
    window: int | list[int] | None = None
    rmax: int | None = None
    n_max: int = 6
    tolerances: dict[str, float] = field(default_factory=dict)
    output: str | None = None
    emit_svg: bool = False
    quick: bool = False
    save_inverse: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        parse_group(self.group)
        if int(self.coeff_dim) < 1:
            raise ValidationError(f"coeff_dim must be positive, got {self.coeff_dim}")
        self.weight_grid = [float(a) for a in self.weight_grid]
        if any(a < 0 or not math.isfinite(a) for a in self.weight_grid):
            raise ValidationError(f"weight exponents must be non-negative, got {self.weight_grid}")
        if self.a is not None and (self.a < 0 or not math.isfinite(self.a)):
            raise ValidationError(f"weight exponent must be non-negative, got {self.a}")
        if isinstance(self.window, list):
            if not self.window or any(b <= a for a, b in zip(self.window, self.window[1:])):
                raise ValidationError(f"window schedule must be strictly increasing, got {self.window}")
            if any(w < 0 for w in self.window):
                raise ValidationError("window radii must be non-negative")
        elif self.window is not None and int(self.window) < 0:
            raise ValidationError(f"window radius must be non-negative, got {self.window}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValidationError(f"unknown tolerance names: {sorted(unknown)}")
        if any(v <= 0 for v in self.tolerances.values()):
            raise ValidationError("tolerances must be positive")

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValidationError(f"unknown experiment fields: {sorted(unknown)}")
        if "command" not in doc:
            raise ValidationError("experiment spec needs a 'command'")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"experiment spec is not valid JSON: {exc}") from None


# -- kernel mini-language ------------------------------------------------

_NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(
    rf"\s*(?P<sign>[+-])?\s*(?:(?P<coef>{_NUMBER})\s*\*\s*)?"
    rf"(?P<atom>I|shift|random\(\s*(?P<R>\d+)\s*,\s*(?P<s>{_NUMBER})\s*,\s*(?P<seed>-?\d+)\s*\))\s*"
)


def parse_kernel_expression(text: str, G: GroupModel, d: int) -> InvariantKernel:
    """Parse ``I``, ``shift``, ``random(R,s,seed)``, scalar multiples and sums.

    ``shift`` is the delta kernel at the first generator with identity
    coefficient.  Example: ``"I + 0.4*shift"``.
    """
    pos = 0
    total = InvariantKernel(G, d, {})
    first = True
    text = text.strip()
    if not text:
        raise ValidationError("empty kernel expression")
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos or (not first and m.group("sign") is None):
            raise ValidationError(f"cannot parse kernel expression {text!r} at position {pos}")
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        if m.group("sign") == "-":
            coef = -coef
        atom = m.group("atom")
        if atom == "I":
            term = InvariantKernel.identity(G, d)
        elif atom == "shift":
            term = InvariantKernel.shift(G, d)
        else:
            term = random_kernel(G, int(m.group("R")), float(m.group("s")), d, int(m.group("seed")))
        total = total + coef * term
        pos = m.end()
        first = False
    return total


def build_kernel(spec: ExperimentSpec, G: GroupModel, default: str) -> InvariantKernel:
    if spec.kernel_file:
        T = read_kernel(spec.kernel_file)
    elif isinstance(spec.kernel, dict) and "entries" not in spec.kernel:
        try:
            R, s, seed = (spec.kernel[k] for k in ("R", "s", "seed"))
        except KeyError:
            raise ValidationError("kernel parameters need R, s and seed (or an interchange document)") from None
        T = random_kernel(G, int(R), float(s), spec.coeff_dim, int(seed))
    elif isinstance(spec.kernel, dict):
        T = from_document(spec.kernel)
    else:
        T = parse_kernel_expression(spec.kernel or default, G, spec.coeff_dim)
    if not isinstance(T, InvariantKernel):
        raise ValidationError("this command needs an invariant kernel")
    if T.group != G:
        raise ValidationError(f"kernel lives on {T.group.spec}, experiment group is {G.spec}")
    return T


# -- outcomes ------------------------------------------------------------


@dataclass
class Outcome:
    tables: dict[str, list[list]] = field(default_factory=dict)
    record: dict = field(default_factory=dict)
    summary: list[str] = field(default_factory=list)
    figures: dict[str, Callable[[Path], None]] = field(default_factory=dict)
    exit_code: int = 0
    inverse: object = None


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(name: str, rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([c for c, _ in COLUMNS[name]])
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _clean(o):
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def output_prefix(spec: ExperimentSpec) -> Path:
    if spec.output:
        return Path(spec.output)
    return Path(os.environ.get(OUTPUT_ENV, ".")) / "groupkernels"


def _path(prefix: Path, suffix: str) -> Path:
    return prefix.with_name(f"{prefix.name}_{suffix}")


def write_outcome(prefix: Path, command: str, out: Outcome, emit_svg: bool) -> list[Path]:
    written = []
    for name, rows in out.tables.items():
        p = _path(prefix, f"{name}.csv")
        atomic_write(p, csv_text(name, rows))
        written.append(p)
    if out.record:
        p = _path(prefix, f"{command}.json")
        atomic_write(p, json.dumps(_clean(out.record), indent=1, sort_keys=True) + "\n")
        written.append(p)
    if emit_svg:
        for name, draw in out.figures.items():
            p = _path(prefix, f"{name}.svg")
            p.parent.mkdir(parents=True, exist_ok=True)
            draw(p)
            written.append(p)
    return written


# -- runners -------------------------------------------------------------


def run_growth(spec: ExperimentSpec) -> Outcome:
    G = parse_group(spec.group)
    rmax = spec.rmax if spec.rmax is not None else 10
    rep = growth_analysis(G, rmax)
    out = Outcome()
    out.tables["growth"] = [[r, b] for r, b in zip(rep.radii, rep.ball_sizes)]
    out.record = {"group": G.spec, **dataclasses.asdict(rep)}
    out.summary = [
        f"group {G.spec}: #B(e,{rmax}) = {rep.ball_sizes[-1]}",
        f"degree estimate {rep.degree_estimate:.4f}, growth constant {rep.growth_constant:.4f}",
        f"growth classified as {'polynomial' if rep.classified_polynomial else 'exponential'}",
    ]
    out.figures["growth"] = lambda p: plotting.plot_growth(rep, p, G.spec)
    return out


def _trace_radii(p: int, R: int) -> list[int]:
    lo = max(p, 1)
    if R <= lo:
        return [R]
    return sorted(set(range(lo, R + 1, max(1, (R - lo) // 6))) | {R})


def run_norms(spec: ExperimentSpec) -> Outcome:
    G = parse_group(spec.group)
    T = build_kernel(spec, G, "random(4,4,0)")
    p = T.propagation
    R = int(spec.window) if spec.window is not None else max(10, p)
    trace = analysis.norm_trace(T, _trace_radii(p, R), spec.tol("norm"))
    norms = [[a, weighted_norm(T, a)] for a in spec.weight_grid]
    out = Outcome()
    out.tables["norms"] = norms
    out.tables["norms_trace"] = [[r, v] for r, v in trace]
    out.record = {"group": G.spec, "propagation": p, "window_radius": R, "norm_2_estimate": trace[-1][1]}
    out.summary = [f"||T||_2 on B(e,{R}) = {trace[-1][1]:.10g}"] + [f"||T||_{a:g} = {v:.10g}" for a, v in norms]
    out.figures["norms_trace"] = lambda path: plotting.plot_norm_trace(trace, None, path)
    return out


def run_schur(spec: ExperimentSpec) -> Outcome:
    G = parse_group(spec.group)
    a = spec.a if spec.a is not None else 3.0
    series = analysis.schur_series(G, a, spec.rmax if spec.rmax is not None else 50)
    T = build_kernel(spec, G, "random(4,4,0)")
    p = T.propagation
    R = int(spec.window) if spec.window is not None else max(10, p)
    rep = analysis.check_schur_bound(
        T, a, R, trace_radii=_trace_radii(p, R), weight_grid=spec.weight_grid, tol=spec.tol("norm"), C0=series.constant
    )
    rhs = rep.schur_rhs
    out = Outcome()
    out.tables["schur"] = [
        [r, v, rhs, v <= rhs + analysis.SCHUR_SLACK] for r, v in rep.convergence_trace
    ]
    out.record = {
        "group": G.spec,
        "a": a,
        "schur_constant": series.constant,
        "partial_sum": series.partial_sum,
        "tail": series.tail,
        "degree_estimate": series.degree_estimate,
        "norm_2_estimate": rep.norm_2_estimate,
        "window_radius": R,
        "weighted_norms": {repr(k): v for k, v in rep.weighted_norms.items()},
        "schur_satisfied": rep.schur_satisfied,
    }
    out.summary = [
        f"C0({G.spec}, a={a:g}) = {series.constant:.10g}",
        f"||T||_2 on B(e,{R}) = {rep.norm_2_estimate:.10g} <= C0 ||T||_a = {rhs:.10g}: {rep.schur_satisfied}",
    ]
    out.figures["schur"] = lambda path: plotting.plot_norm_trace(rep.convergence_trace, rhs, path)
    if not rep.schur_satisfied:
        out.exit_code = 1
    return out


def run_truncate(spec: ExperimentSpec) -> Outcome:
    G = parse_group(spec.group)
    a = spec.a if spec.a is not None else 1.0
    T = build_kernel(spec, G, "random(4,4,0)")
    p = T.propagation
    rows = []
    for n in range(p + 1):
        exact, bound = analysis.truncation_error(T, a, spec.r, n)
        rows.append([n, exact, bound])
    out = Outcome()
    out.tables["truncate"] = rows
    out.record = {"group": G.spec, "a": a, "r": spec.r, "propagation": p,
                  "bound_holds": all(e <= b for _, e, b in rows)}
    out.summary = [f"n={n}: exact {e:.6e} <= bound {b:.6e}" for n, e, b in rows]
    out.figures["truncate"] = lambda path: plotting.plot_truncation(
        [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows], path
    )
    return out


def run_powers(spec: ExperimentSpec) -> Outcome:
    G = parse_group(spec.group)
    a = spec.a if spec.a is not None else 1.0
    T = build_kernel(spec, G, "random(2,3,0)")
    R = int(spec.window) if spec.window is not None else max(10, T.propagation)
    fit = analysis.power_norm_experiment(T, a, spec.n_max, R, spec.tol("norm"))
    out = Outcome()
    out.tables["powers"] = [[k, v, x] for k, v, x in zip(fit.powers, fit.weighted_norms, fit.excess)]
    out.record = {
        "group": G.spec,
        "a": a,
        "window_radius": R,
        "norm_2_estimate": fit.norm_2,
        "weighted_norm": fit.norm_a,
        "alpha": fit.alpha,
        "beta": fit.beta,
        "C": fit.C,
        "residual": fit.residual,
        "stopped_early": fit.stopped_early,
        "note": "exploratory fit; no constants are asserted",
    }
    out.summary = [
        f"||T||_2 ~ {fit.norm_2:.8g}, ||T||_a = {fit.norm_a:.8g}",
        f"fit: alpha = {fit.alpha:.6g}, beta = {fit.beta:g} (fixed), C = {fit.C:.6g}, rms residual {fit.residual:.3e}",
    ]
    out.figures["powers"] = lambda path: plotting.plot_powers(fit.powers, fit.weighted_norms, fit.norm_2, path)
    return out


def run_invert(spec: ExperimentSpec) -> Outcome:
    G = parse_group(spec.group)
    T = build_kernel(spec, G, "I+0.4*shift")
    p = T.propagation
    tol = spec.tol("neumann")
    if isinstance(spec.window, list):
        radii = [int(r) for r in spec.window]
    else:
        radii = [int(spec.window) if spec.window is not None else max(24, 3 * p)]
    if len(radii) > 1:
        rep = inversion.inverse_closedness_report(T, radii, spec.weight_grid, tol)
        inverses, diags = rep.inverses, rep.diagnostics
    else:
        K, dg = inversion.neumann_inverse(T, radii[0], spec.weight_grid, tol)
        inverses, diags, rep = [K], [dg], None
    trace_rows, decay_rows = [], []
    for K, dg in zip(inverses, diags):
        for a, vals in dg.weighted_norm_trace.items():
            trace_rows.extend([dg.window_radius, k, a, v] for k, v in enumerate(vals))
        for length, v in envelope(K).by_length().items():
            decay_rows.append([dg.window_radius, length, v])
    out = Outcome()
    out.tables["invert"] = trace_rows
    out.tables["invert_decay"] = decay_rows
    out.record = {"group": G.spec, "propagation": p, "diagnostics": [dg.as_record() for dg in diags]}
    if rep is not None:
        out.record["closedness"] = {
            "interior_radius": rep.interior_radius,
            "interior_differences": rep.interior_differences,
            "weighted_norms": {repr(a): v for a, v in rep.weighted_norms.items()},
            "relative_changes": {repr(a): v for a, v in rep.relative_changes().items()},
            "decay_exponents": rep.decay_exponents,
        }
    for dg in diags:
        out.summary.append(
            f"R={dg.window_radius}: M={dg.M:.6g} N={dg.N:.6g} q={dg.contraction_q:.6g} "
            f"(bound {dg.contraction_bound:.6g}), {dg.iterations} iterations, residual {dg.residual_2:.3e}, "
            f"decay exponent {dg.decay_exponent:.3f} (rms residual {dg.decay_fit_residual:.3f})"
        )
    last_K, last = inverses[-1], diags[-1]
    by_len = envelope(last_K).by_length()
    lens = [k for k in by_len if k > p]
    out.figures["invert"] = lambda path: plotting.plot_neumann_trace(last.weighted_norm_trace, path)
    out.figures["invert_decay"] = lambda path: plotting.plot_decay(
        lens, [by_len[k] for k in lens], last.decay_exponent, path
    )
    if spec.save_inverse:
        out.inverse = last_K
    return out


RUNNERS = {
    "growth": run_growth,
    "norms": run_norms,
    "schur": run_schur,
    "truncate": run_truncate,
    "powers": run_powers,
    "invert": run_invert,
}


def execute(spec: ExperimentSpec) -> tuple[Outcome, list[Path]]:
    """Run a non-suite command and write its artifacts."""
    out = RUNNERS[spec.command](spec)
    prefix = output_prefix(spec)
    written = write_outcome(prefix, spec.command, out, spec.emit_svg)
    if out.inverse is not None:
        p = _path(prefix, "inverse.json")
        write_kernel(out.inverse, p)
        written.append(p)
    return out, written
