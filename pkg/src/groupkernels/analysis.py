"""Operator norms on finite sections and the weighted-norm estimates.

The central estimate is the Schur-type bound ``||T||_2 <= C0 ||T||_a`` for
groups of polynomial growth, with

    C0^2 = sum_{n >= 0} #B(e, n+1) (1 + n)^{-2a},

which converges when ``2a`` exceeds the growth degree plus two.  The same
tail mechanism gives the truncation estimate
``||T - T_n||_a <= (2 + n)^{-r} ||T||_{a+r}``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import spectral_norm
from .errors import (
    DecayPreconditionError,
    GrowthPreconditionError,
    NonConvergenceError,
    ResourceLimitError,
    ValidationError,
    WindowTooSmallError,
)
from .groups import DEFAULT_BUDGET, GroupModel, growth_analysis
from .kernels import (
    InvariantKernel,
    Weight,
    _as_weight,
    compose,
    envelope,
    truncate,
    weighted_norm,
    window_kernel,
)

log = logging.getLogger(__name__)

SCHUR_SLACK = 1e-9
# tail majorant inflates the fitted growth constant by this factor
GROWTH_SAFETY = 2.0
GROWTH_PROBE_RADIUS = 10


@dataclass
class NormReport:
    norm_2_estimate: float
    window_radius: int
    weighted_norms: dict[float, float]
    schur_constant: float
    schur_satisfied: bool
    convergence_trace: list[tuple[int, float]] = field(default_factory=list)
    weight: float = 0.0

    @property
    def schur_rhs(self) -> float:
        return self.schur_constant * self.weighted_norms[self.weight]


@dataclass(frozen=True)
class SchurSeries:
    constant: float
    partial_sum: float
    tail: float
    degree_estimate: float
    growth_constant: float
    r_max: int


@dataclass
class PowerNormFit:
    """Least-squares fit of ``log ||T^k||_a ~ log C + alpha k log||T||_2 + beta log||T||_a``.

    ``beta`` is pinned to 1: with a single operator, ``log ||T||_a`` is a
    constant column and cannot be separated from ``log C``.
    """

    alpha: float
    beta: float
    C: float
    residual: float
    powers: list[int]
    weighted_norms: list[float]
    norm_2: float
    norm_a: float
    stopped_early: bool = False

    @property
    def excess(self) -> list[float]:
        """``log ||T^k||_a - k log ||T||_2`` for each recorded power."""
        l2 = math.log(self.norm_2) if self.norm_2 > 0 else -math.inf
        return [math.log(v) - k * l2 for k, v in zip(self.powers, self.weighted_norms)]


def op_norm_2(T: InvariantKernel, R: int, tol: float = 1e-10) -> float:
    """Largest singular value of the finite section of ``T`` on ``B(e, R)``.

    This is a lower bound for ``||T||_2`` and grows with ``R``.
    """
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    p = T.propagation
    if R < p:
        raise WindowTooSmallError(f"window radius {R} is smaller than the propagation {p}")
    return spectral_norm(window_kernel(T, R).matrix, tol)


def norm_trace(T: InvariantKernel, radii, tol: float = 1e-10) -> list[tuple[int, float]]:
    return [(int(R), op_norm_2(T, R, tol)) for R in radii]


def _check_growth(G: GroupModel, a: float, rep, r: int) -> None:
    if not rep.classified_polynomial:
        raise GrowthPreconditionError(
            f"{G.spec} does not have polynomial u-growth (#B(e,r) follows an exponential law up to r={r}), "
            "so the weighted norms do not control the operator norm"
        )
    t = rep.degree_estimate
    if not 2 * a > t + 2:
        raise DecayPreconditionError(
            f"weight exponent a={a:g} is too small for the fitted growth degree {t:.4f} of {G.spec} "
            f"(on radii up to {r}); need 2a > degree + 2"
        )


def schur_series(G: GroupModel, w, r_max: int = 50, tail_rtol: float = 1e-3) -> SchurSeries:
    """Evaluate the Schur constant with its partial sum and tail majorant.

    Ball sizes up to ``r_max`` are exact; beyond that ``#B(e, r)`` is bounded
    by ``GROWTH_SAFETY * c (1 + r)^t`` from the fitted growth law.
    """
    a = _as_weight(w).exponent
    # classify on a cheap radius first so hopeless inputs fail fast
    probe = min(r_max, GROWTH_PROBE_RADIUS)
    while probe > 4 and (G.ball_cardinality(probe) or 0) > DEFAULT_BUDGET // 4:
        probe -= 1
    _check_growth(G, a, growth_analysis(G, probe), probe)
    try:
        rep = growth_analysis(G, r_max)
    except ResourceLimitError as exc:
        raise ResourceLimitError(f"{exc}; choose a smaller r_max", exc.cardinality) from None
    _check_growth(G, a, rep, r_max)
    t = rep.degree_estimate
    sizes = rep.ball_sizes
    partial = math.fsum(sizes[n + 1] * (1.0 + n) ** (-2 * a) for n in range(r_max))
    c = GROWTH_SAFETY * rep.growth_constant
    q = 1.0 + r_max
    tail = c * (1.0 + 1.0 / q) ** t * q ** (t - 2 * a) * (1.0 + q / (2 * a - t - 1.0))
    if tail > tail_rtol * partial:
        raise NonConvergenceError(
            f"Schur series tail {tail:.3e} is not negligible against the partial sum {partial:.6g} "
            f"at r_max={r_max}; increase r_max"
        )
    return SchurSeries(
        constant=math.sqrt(partial + tail),
        partial_sum=partial,
        tail=tail,
        degree_estimate=t,
        growth_constant=rep.growth_constant,
        r_max=r_max,
    )


def schur_constant(G: GroupModel, w, r_max: int = 50, tail_rtol: float = 1e-3) -> float:
    return schur_series(G, w, r_max, tail_rtol).constant


def check_schur_bound(
    T: InvariantKernel,
    w,
    R: int,
    r_max: int = 50,
    trace_radii=None,
    weight_grid=(),
    tol: float = 1e-10,
    C0: float | None = None,
) -> NormReport:
    """Compare the finite-section norm of ``T`` with ``C0 ||T||_a``."""
    w = _as_weight(w)
    if C0 is None:
        C0 = schur_constant(T.group, w, r_max)
    radii = sorted(set(trace_radii or ()) | {R})
    trace = norm_trace(T, radii, tol)
    n2 = dict(trace)[R]
    grid = sorted({w.exponent, *map(float, weight_grid)})
    norms = {a: weighted_norm(T, a) for a in grid}
    ok = n2 <= C0 * norms[w.exponent] + SCHUR_SLACK
    if not ok:
        log.error("Schur bound violated: %.12g > %.12g", n2, C0 * norms[w.exponent])
    return NormReport(
        norm_2_estimate=n2,
        window_radius=R,
        weighted_norms=norms,
        schur_constant=C0,
        schur_satisfied=ok,
        convergence_trace=trace,
        weight=w.exponent,
    )


def truncation_error(T: InvariantKernel, w, r: float, n: int) -> tuple[float, float]:
    """Exact ``||T - T_n||_a`` and the bound ``(2 + n)^{-r} ||T||_{a+r}``."""
    if r <= 0:
        raise ValidationError(f"extra smoothness r must be positive, got {r}")
    a = _as_weight(w).exponent
    env = envelope(T)
    exact = math.sqrt(
        math.fsum(
            v * v * (1.0 + env.lengths[g]) ** (2 * a) for g, v in env.values.items() if env.lengths[g] > n
        )
    )
    bound = (2.0 + n) ** (-r) * weighted_norm(T, a + r)
    return exact, bound


def truncation_error_direct(T: InvariantKernel, w, n: int) -> float:
    """``||T - T_n||_a`` as the weighted norm of the difference kernel."""
    return weighted_norm(T - truncate(T, n), w)


def power_norm_experiment(T: InvariantKernel, w, n_max: int, R: int, tol: float = 1e-10) -> PowerNormFit:
    """Track ``||T^k||_a`` for ``k = 1..n_max`` against ``||T||_2^k``.

    Exploratory: the fitted constants are reported, nothing is asserted.
    """
    if n_max < 3:
        raise ValidationError(f"n_max must be at least 3, got {n_max}")
    w = _as_weight(w)
    norm2 = op_norm_2(T, R, tol)
    norm_a = weighted_norm(T, w)
    powers, norms = [], []
    P = T
    stopped = False
    for k in range(1, n_max + 1):
        if k > 1:
            P = compose(P, T)
        v = weighted_norm(P, w)
        if not math.isfinite(v) or v > 1e300:
            stopped = True
            break
        powers.append(k)
        norms.append(v)
    if len(powers) < 2 or min(norms) <= 0:
        return PowerNormFit(math.nan, 1.0, math.nan, math.nan, powers, norms, norm2, norm_a, stopped)
    ks = np.asarray(powers, dtype=float)
    y = np.log(norms)
    l2 = math.log(norm2) if norm2 > 0 else 0.0
    X = np.column_stack([np.ones_like(ks), ks * l2])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    residual = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    C = math.exp(coef[0] - math.log(norm_a))
    return PowerNormFit(float(coef[1]), 1.0, C, residual, powers, norms, norm2, norm_a, stopped)
