"""The acceptance matrix behind ``groupkernels suite``.

Each item is a function taking a shared context dict and returning a
:class:`CriterionResult`.  Items run in order; item 7 reuses the inversion
diagnostics recorded by items 5 and 6.  ``quick=True`` shrinks the sample
counts of the expensive items.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels as _kernels
from .analysis import op_norm_2, power_norm_experiment, schur_constant, truncation_error
from .coefficients import op_norm, spectral_norm
from .errors import ValidationError
from .groups import FreeGroup, Heisenberg3, IntegerLattice, ball_sizes, growth_analysis
from .inversion import near_identity, neumann_inverse, inverse_closedness_report
from .kernels import (
    InvariantKernel,
    adjoint_kernel,
    compose,
    envelope,
    random_kernel,
    weighted_norm,
    window_kernel,
)


@dataclass
class CriterionResult:
    item: int
    name: str
    passed: bool
    measured: dict
    tolerance: str
    seconds: float = 0.0
    data: list[tuple[str, int, float]] = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] item {self.item:2d} {self.name}: {format_measured(self.measured)} ({self.tolerance})"


def format_measured(measured: dict) -> str:
    parts = []
    for k, v in measured.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        parts.append(f"{k}={v}")
    return "; ".join(parts)


@contextlib.contextmanager
def inject_fault(name: str | None):
    """Test hook that deliberately breaks one mechanism."""
    if name is None:
        yield
        return
    if name != "negate-weight":
        raise ValidationError(f"unknown fault {name!r}")
    _kernels._NEGATE_WEIGHT = True
    try:
        yield
    finally:
        _kernels._NEGATE_WEIGHT = False


Z1, Z2 = IntegerLattice(1), IntegerLattice(2)


def item_growth_exactness(ctx) -> CriterionResult:
    checks = [
        (Z1, 10, lambda r: 2 * r + 1),
        (Z2, 10, lambda r: 2 * r * r + 2 * r + 1),
        (FreeGroup(2), 8, lambda r: 2 * 3**r - 1),
    ]
    mismatches = 0
    data = []
    for G, rmax, closed in checks:
        sizes = ball_sizes(G, rmax)
        for r, b in enumerate(sizes):
            data.append((f"{G.spec}:ball_size", r, b))
            mismatches += b != closed(r)
    return CriterionResult(
        1, "growth exactness", mismatches == 0, {"mismatches": mismatches},
        "integer equality with closed forms; runtime < 5 s",
        data=data,
    )


def item_heisenberg_degree(ctx) -> CriterionResult:
    rep = growth_analysis(Heisenberg3(), 10)
    ok = 3.5 <= rep.degree_estimate <= 4.5 and rep.classified_polynomial
    return CriterionResult(
        2, "Heisenberg growth degree", ok,
        {"degree": rep.degree_estimate, "polynomial": rep.classified_polynomial,
         "residual_poly": rep.residual_polynomial, "residual_exp": rep.residual_exponential},
        "degree on r in [5,10] within [3.5, 4.5], polynomial model wins; runtime < 20 s",
        data=[("H3:ball_size", r, b) for r, b in enumerate(rep.ball_sizes)],
    )


def item_schur_bound(ctx) -> CriterionResult:
    n = 10 if ctx["quick"] else 100
    C0 = schur_constant(Z2, 3.0, 50)
    violations = 0
    worst = 0.0
    data = []
    for seed in range(n):
        T = random_kernel(Z2, 4, 4.0, 2, seed)
        n2 = op_norm_2(T, 10)
        rhs = C0 * weighted_norm(T, 3.0)
        violations += not (n2 <= rhs + 1e-9)
        worst = max(worst, n2 / rhs)
        data.append(("norm_2_estimate", seed, n2))
        data.append(("schur_rhs", seed, rhs))
    return CriterionResult(
        3, "Schur bound", violations == 0,
        {"kernels": n, "C0": C0, "violations": violations, "max_ratio": worst},
        "||T||_2 on B(e,10) <= C0 ||T||_3 for every kernel; runtime < 60 s",
        data=data,
    )


def item_truncation_tail(ctx) -> CriterionResult:
    n_kernels = 10 if ctx["quick"] else 100
    violations = 0
    data = []
    for seed in range(n_kernels):
        T = random_kernel(Z2, 4, 4.0, 2, seed)
        p = T.propagation
        prev = math.inf
        for n in range(p + 1):
            exact, bound = truncation_error(T, 1.0, 2.0, n)
            violations += exact > bound
            violations += exact > prev
            prev = exact
            if seed == 0:
                data.append(("exact", n, exact))
                data.append(("bound", n, bound))
        violations += prev != 0.0
    return CriterionResult(
        4, "truncation tail", violations == 0, {"kernels": n_kernels, "violations": violations},
        "exact <= (2+n)^-2 ||T||_3, exact non-increasing and 0 at n = propagation",
        data=data,
    )


def item_neumann_correctness(ctx) -> CriterionResult:
    T = InvariantKernel.identity(Z1, 1) + InvariantKernel.shift(Z1, 1, 0.4)
    tol = 1e-8
    K, dg = neumann_inverse(T, 24, (1.0, 2.0, 3.0), tol)
    ctx.setdefault("inversions", []).append(dg)
    X = window_kernel(T, 24).matrix
    dense = np.linalg.solve(X, np.eye(X.shape[0]))
    n_int = K.window.interior(12)
    oracle_err = float(np.max(np.abs(dense[:n_int, :n_int] - K.matrix[:n_int, :n_int])))
    q, k = dg.contraction_q, dg.iterations - 1
    count_ok = q ** (k + 1) / (1 - q) < tol and (k == 0 or q**k / (1 - q) >= tol)
    env = envelope(K)
    rel = max(abs(env[Z1.element(j)] / 0.4**j - 1) for j in range(2, 9))
    ok = dg.residual_2 < 1e-8 and oracle_err < 1e-8 and count_ok and rel < 0.1
    return CriterionResult(
        5, "Neumann inversion correctness", ok,
        {"residual_2": dg.residual_2, "oracle_error": oracle_err, "iterations": dg.iterations,
         "q": q, "count_consistent": count_ok, "max_envelope_rel_dev": rel},
        "residual < 1e-8, interior oracle error < 1e-8, stopping rule, envelope within 10% of 0.4^k; runtime < 10 s",
        data=[("envelope", j, env[Z1.element(j)]) for j in range(0, 13)],
    )


def item_inverse_closedness(ctx) -> CriterionResult:
    seeds = range(1) if ctx["quick"] else range(5)
    failures = 0
    data = []
    worst_change, min_b = 0.0, math.inf
    residuals = []
    for seed in seeds:
        T = near_identity(random_kernel(Z2, 2, 4.0, 2, seed), 0.2, 12)
        rep = inverse_closedness_report(T, (8, 10, 12), (1.0, 2.0, 3.0), 1e-8)
        ctx.setdefault("inversions", []).extend(rep.diagnostics)
        changes = {a: v[-1] for a, v in rep.relative_changes().items()}
        worst_change = max(worst_change, *changes.values())
        bs = rep.decay_exponents
        min_b = min(min_b, *bs)
        residuals.extend(dg.decay_fit_residual for dg in rep.diagnostics)
        failures += any(c >= 0.01 for c in changes.values()) or any(not b >= 2 for b in bs)
        for a, v in rep.weighted_norms.items():
            data.append((f"seed{seed}:inverse_norm_a{a:g}", rep.radii[-1], v[-1]))
        for R, b in zip(rep.radii, bs):
            data.append((f"seed{seed}:decay_exponent", R, b))
    return CriterionResult(
        6, "empirical inverse-closedness", failures == 0,
        {"seeds": len(seeds), "failures": failures, "max_rel_change": worst_change, "min_decay_b": min_b,
         "max_fit_residual": max(residuals)},
        "norm change < 1% between windows 10 and 12, decay b >= 2, every seed; runtime < 3 min",
        data=data,
    )


def item_contraction(ctx) -> CriterionResult:
    diags = ctx.get("inversions", [])
    bad = sum(not (dg.contraction_q <= dg.contraction_bound + 1e-9 and dg.contraction_q < 1) for dg in diags)
    margin = max((dg.contraction_q - dg.contraction_bound for dg in diags), default=math.nan)
    return CriterionResult(
        7, "contraction inequality", bool(diags) and bad == 0,
        {"runs": len(diags), "violations": bad, "max_q_minus_bound": margin},
        "q <= (N-M)/(M+N) + 1e-9 and q < 1 across items 5-6",
        data=[("contraction_q", i, dg.contraction_q) for i, dg in enumerate(diags)],
    )


def _random_instance(rng):
    G = [Z1, Z2, Heisenberg3(), FreeGroup(2)][int(rng.integers(4))]
    R = int(rng.integers(0, 3))
    s = float(rng.uniform(0, 4))
    d = int(rng.integers(1, 4))
    return G, R, s, d


def item_algebra_properties(ctx) -> CriterionResult:
    trials = 100 if ctx["quick"] else 1000
    rng = np.random.default_rng(20240808)
    fails = {k: 0 for k in ("involution", "anti_homomorphism", "associativity", "monotonicity",
                            "cstar_coefficient", "cstar_section")}
    for _ in range(trials):
        G, R, s, d = _random_instance(rng)
        seeds = [int(x) for x in rng.integers(0, 2**31, size=3)]
        T, S, U = (random_kernel(G, R, s, d, k) for k in seeds)
        Tss = adjoint_kernel(adjoint_kernel(T))
        fails["involution"] += not T.allclose(Tss, 0.0)
        fails["anti_homomorphism"] += not adjoint_kernel(compose(T, S)).allclose(
            compose(adjoint_kernel(S), adjoint_kernel(T)), 1e-10)
        fails["associativity"] += not compose(compose(T, S), U).allclose(compose(T, compose(S, U)), 1e-9)
        a1, a2 = sorted(float(x) for x in rng.uniform(0, 5, size=2))
        fails["monotonicity"] += not weighted_norm(T, a1) <= weighted_norm(T, a2) * (1 + 1e-12)
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        nx = op_norm(X)
        fails["cstar_coefficient"] += abs(op_norm(X.conj().T @ X) - nx * nx) > 1e-8 * nx * nx
        L = Z1 if G is Z1 or rng.integers(2) else Z2
        TL = random_kernel(L, R, s, d, seeds[0])
        W = window_kernel(TL, R + 2).matrix
        n2 = spectral_norm(W)
        fails["cstar_section"] += abs(spectral_norm(W.conj().T @ W) - n2 * n2) > 1e-6 * n2 * n2
    total = sum(fails.values())
    return CriterionResult(
        8, "algebra properties", total == 0, {"trials": trials, **fails},
        "involution exact, (TS)*=S*T* 1e-10, associativity 1e-9, monotone in a 1e-12, C*-identities 1e-8 / 1e-6",
    )


def item_power_probe(ctx) -> CriterionResult:
    shift = InvariantKernel.shift(Z1, 1)
    fit = power_norm_experiment(shift, 1.0, 10, 10)
    exact_err = max(abs(v - (1 + k)) for k, v in zip(fit.powers, fit.weighted_norms))
    seeds = range(2) if ctx["quick"] else range(5)
    max_step = -math.inf
    data = [("shift_power_norm", k, v) for k, v in zip(fit.powers, fit.weighted_norms)]
    for seed in seeds:
        T = random_kernel(Z2, 2, 3.0, 2, seed)
        f = power_norm_experiment(T, 1.0, 6, 10)
        ex = f.excess
        steps = [ex[k] - ex[k - 1] for k in range(3, 6)]  # k = 3 -> 4, 4 -> 5, 5 -> 6
        max_step = max(max_step, *steps)
        data.extend((f"seed{seed}:excess", k, x) for k, x in zip(f.powers, ex))
    ok = exact_err <= 1e-9 and len(fit.powers) == 10 and max_step < 1.0
    return CriterionResult(
        9, "power-norm probe", ok,
        {"shift_max_error": exact_err, "max_excess_step": max_step, "seeds": len(seeds)},
        "||delta^k||_1 = 1+k within 1e-9 for k <= 10; excess grows < 1.0 per step on k in [3,6]",
        data=data,
    )


def _determinism_specs():
    from .experiments import ExperimentSpec

    return [
        ExperimentSpec("growth", group="Z^2", rmax=12),
        ExperimentSpec("growth", group="H3", rmax=6),
        ExperimentSpec("truncate", group="Z^2"),
        ExperimentSpec("schur", group="Z^2", window=6),
        ExperimentSpec("powers", group="Z^2", n_max=4, window=8),
        ExperimentSpec("invert", group="Z^1", coeff_dim=1, window=24),
    ]


def _csv_digest(root: Path) -> dict[str, str]:
    from .experiments import execute

    out = {}
    for i, spec in enumerate(_determinism_specs()):
        spec.output = str(root / f"run{i}")
        _, files = execute(spec)
        for p in files:
            if p.suffix == ".csv":
                out[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def item_determinism(ctx) -> CriterionResult:
    with tempfile.TemporaryDirectory() as d1, tempfile.TemporaryDirectory() as d2:
        first = _csv_digest(Path(d1))
        second = _csv_digest(Path(d2))
    same = first == second and bool(first)
    return CriterionResult(
        10, "determinism", same, {"csv_files": len(first), "identical": same},
        "repeated runs give byte-identical CSV files",
    )


ITEMS = [
    item_growth_exactness,
    item_heisenberg_degree,
    item_schur_bound,
    item_truncation_tail,
    item_neumann_correctness,
    item_inverse_closedness,
    item_contraction,
    item_algebra_properties,
    item_power_probe,
    item_determinism,
]

TIME_LIMITS = {1: 5.0, 2: 20.0, 3: 60.0, 5: 10.0, 6: 180.0}


def run_items(quick: bool = False, fault: str | None = None, only=None, progress=None) -> list[CriterionResult]:
    ctx = {"quick": quick}
    results = []
    with inject_fault(fault):
        for fn in ITEMS:
            t0 = time.perf_counter()
            res = fn(ctx)
            res.seconds = time.perf_counter() - t0
            limit = TIME_LIMITS.get(res.item)
            if limit is not None and res.seconds >= limit:
                res.passed = False
                res.measured["runtime_exceeded"] = True
            if only is None or res.item in only:
                results.append(res)
                if progress:
                    progress(res)
    return results


def manifest_rows(results) -> list[list]:
    return [[r.item, r.name, r.passed, format_measured(r.measured), r.tolerance] for r in results]


def data_rows(results) -> list[list]:
    return [[r.item, q, i, float(v)] for r in results for q, i, v in r.data]


def manifest_record(results, quick: bool) -> dict:
    return {
        "quick": quick,
        "passed": all(r.passed for r in results),
        "items": [
            {"item": r.item, "name": r.name, "passed": r.passed, "measured": r.measured,
             "tolerance": r.tolerance, "seconds": r.seconds}
            for r in results
        ],
    }


def manifest_json(results, quick: bool) -> str:
    return json.dumps(manifest_record(results, quick), indent=1, default=str) + "\n"
