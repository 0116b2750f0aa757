"""Constructive inversion of finite sections by a Neumann series.

For an operator ``T`` bounded below, ``P = T^* T`` satisfies
``M I <= P <= N I`` with ``M > 0``.  Setting ``A = I - 2P/(M+N)`` gives
``||A||_2 <= (N-M)/(N+M) < 1``, so

    P^{-1} = 2/(M+N) * sum_i A^i,      T^{-1} = P^{-1} T^*.

Everything here runs on the finite section of ``T`` over ``B(e, R)``.  The
partial sums ``S_k = I + A S_{k-1}`` are tracked in the weighted norms, and
the envelope of the computed inverse is fitted against a power law to
measure its off-diagonal decay.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import op_norm_2
from .coefficients import dominant_eigenvalues, spectral_norm
from .errors import (
    InsufficientDataError,
    NonConvergenceError,
    NotInvertibleError,
    ValidationError,
    WindowTooSmallError,
)
from .kernels import (
    ZERO_TOL,
    InvariantKernel,
    WindowedKernel,
    _as_weight,
    envelope,
    window_kernel,
)

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-6
MAX_ITERATIONS = 100_000


@dataclass
class InversionDiagnostics:
    M: float
    N: float
    contraction_q: float
    iterations: int
    residual_2: float
    weighted_norm_trace: dict[float, list[float]]
    decay_exponent: float
    decay_fit_residual: float
    residual_2_left: float = 0.0
    tol: float = 0.0
    window_radius: int = 0

    @property
    def contraction_bound(self) -> float:
        """``(N - M)/(N + M)``, the a-priori bound on ``||A||_2``."""
        return (self.N - self.M) / (self.N + self.M)

    def as_record(self) -> dict:
        return {
            "window_radius": self.window_radius,
            "tol": self.tol,
            "M": self.M,
            "N": self.N,
            "contraction_q": self.contraction_q,
            "contraction_bound": self.contraction_bound,
            "iterations": self.iterations,
            "residual_2": self.residual_2,
            "residual_2_left": self.residual_2_left,
            "decay_exponent": self.decay_exponent,
            "decay_fit_residual": self.decay_fit_residual,
            "weighted_norm_trace": {repr(a): v for a, v in self.weighted_norm_trace.items()},
        }


@dataclass
class ClosednessReport:
    radii: list[int]
    diagnostics: list[InversionDiagnostics]
    interior_radius: int
    interior_differences: list[float]
    weighted_norms: dict[float, list[float]]
    decay_exponents: list[float]
    inverses: list[WindowedKernel] = field(default_factory=list, repr=False)

    def relative_changes(self) -> dict[float, list[float]]:
        return {
            a: [abs(v[i + 1] - v[i]) / abs(v[i]) for i in range(len(v) - 1)]
            for a, v in self.weighted_norms.items()
        }


def _matrix(P) -> np.ndarray:
    return P.matrix if isinstance(P, WindowedKernel) else np.asarray(P, dtype=np.complex128)


def spectral_bounds(P, tol: float = 1e-10) -> tuple[float, float]:
    """Outward-rounded ``(M, N)`` with ``M I <= P <= N I``.

    ``N`` is the top eigenvalue of ``P``; ``M`` is ``N`` minus the top
    eigenvalue of ``N I - P``.  Both come from power iteration and are
    widened by ``10 tol`` in relative terms.
    """
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    P = _matrix(P)
    if np.max(np.abs(P - P.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(P))):
        raise ValidationError("spectral bounds need a Hermitian operator")
    n = P.shape[0]
    N = float(dominant_eigenvalues(P[None], tol)[0])
    if N <= 0:
        raise NotInvertibleError("operator is zero on the window")
    shifted = N * np.eye(n) - P
    mu = float(dominant_eigenvalues(shifted[None], tol)[0])
    M = N - mu
    if 0 < M < mu:
        # absolute error in M is about tol * mu; tighten so it stays below tol * M
        mu = float(dominant_eigenvalues(shifted[None], max(tol * M / mu, 1e-15))[0])
        M = N - mu
    M_out, N_out = M * (1 - 10 * tol), N * (1 + 10 * tol)
    if M_out <= 1e-14 * N_out:
        raise NotInvertibleError(
            f"T*T is numerically singular on this window (lower bound M={M:.3e}); "
            "the operator is not bounded below"
        )
    return M_out, N_out


def decay_fit(K, l_min: int = 0) -> tuple[float, float]:
    """Fit ``env(gamma) ~ const (1 + l(gamma))^{-b}`` over diagonals with ``l >= l_min``.

    Returns ``(b, rms_residual)``.  Exponential decay shows up as a large
    ``b`` with a visibly nonzero residual.
    """
    env = envelope(K)
    pts = [(env.lengths[g], v) for g, v in env.values.items() if env.lengths[g] >= l_min and v >= ZERO_TOL]
    if len(pts) < 3:
        raise InsufficientDataError(f"decay fit needs at least 3 diagonals with l >= {l_min}, found {len(pts)}")
    x = np.log1p(np.array([p[0] for p in pts], dtype=float))
    y = np.log(np.array([p[1] for p in pts]))
    if np.ptp(x) == 0:
        raise InsufficientDataError("all usable diagonals have the same word length")
    X = np.column_stack([np.ones_like(x), -x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    residual = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return float(coef[1]), residual


def neumann_inverse(
    T: InvariantKernel,
    R: int,
    w_grid=(1.0, 2.0, 3.0),
    tol: float = 1e-8,
    max_iter: int = MAX_ITERATIONS,
    l_min: int | None = None,
) -> tuple[WindowedKernel, InversionDiagnostics]:
    """Invert the finite section of ``T`` on ``B(e, R)`` through ``(T^*T)^{-1} T^*``."""
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    p = T.propagation
    if R < 3 * p:
        raise WindowTooSmallError(f"window radius {R} must be at least 3 x propagation = {3 * p}")
    grid = [_as_weight(a).exponent for a in w_grid]
    G, d = T.group, T.coeff_dim
    X = window_kernel(T, R).matrix
    dim = X.shape[0]
    I = np.eye(dim, dtype=np.complex128)
    P = X.conj().T @ X
    M, N = spectral_bounds(P, tol)
    c = 2.0 / (M + N)
    A = I - c * P
    q = spectral_norm(A, tol)
    if q >= 1.0:
        raise NonConvergenceError(f"Neumann iterate is not a contraction (q={q:.6g})")

    def record(S):
        env = envelope(WindowedKernel(G, R, d, S))
        for a in grid:
            trace[a].append(env.weighted_norm(a))

    trace: dict[float, list[float]] = {a: [] for a in grid}
    S = I.copy()
    record(S)
    k = 0
    while q ** (k + 1) / (1.0 - q) >= tol:
        k += 1
        if k > max_iter:
            raise NonConvergenceError(
                f"Neumann series did not reach tol={tol:g} within {max_iter} iterations (q={q:.6g})"
            )
        S = I + A @ S
        record(S)
    P_inv = c * S
    # residuals only need a few significant digits
    residual = spectral_norm(P @ P_inv - I, RESIDUAL_TOL)
    residual_left = spectral_norm(P_inv @ P - I, RESIDUAL_TOL)
    if residual > tol:
        raise NonConvergenceError(f"window residual {residual:.3e} exceeds tol={tol:g}")
    T_inv = WindowedKernel(G, R, d, P_inv @ X.conj().T)
    try:
        b, b_res = decay_fit(T_inv, p + 1 if l_min is None else l_min)
    except InsufficientDataError:
        b, b_res = math.nan, math.nan
    diag = InversionDiagnostics(
        M=M,
        N=N,
        contraction_q=q,
        iterations=k + 1,
        residual_2=residual,
        weighted_norm_trace=trace,
        decay_exponent=b,
        decay_fit_residual=b_res,
        residual_2_left=residual_left,
        tol=tol,
        window_radius=R,
    )
    log.debug("neumann_inverse R=%d: q=%.6g, %d iterations, residual %.3e", R, q, k + 1, residual)
    return T_inv, diag


def inverse_closedness_report(T: InvariantKernel, R_schedule, w_grid=(1.0, 2.0, 3.0), tol: float = 1e-8) -> ClosednessReport:
    """Invert ``T`` on growing windows and measure how the inverse settles."""
    radii = [int(r) for r in R_schedule]
    if not radii or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValidationError(f"window schedule must be strictly increasing, got {radii}")
    grid = [_as_weight(a).exponent for a in w_grid]
    inverses, diags = [], []
    for R in radii:
        K, dg = neumann_inverse(T, R, grid, tol)
        inverses.append(K)
        diags.append(dg)
    r_int = radii[0] // 2
    n_int = inverses[0].window.interior(r_int) * T.coeff_dim
    diffs = [
        float(np.max(np.abs(b.matrix[:n_int, :n_int] - a.matrix[:n_int, :n_int])))
        for a, b in zip(inverses, inverses[1:])
    ]
    norms = {a: [envelope(K).weighted_norm(a) for K in inverses] for a in grid}
    return ClosednessReport(
        radii=radii,
        diagnostics=diags,
        interior_radius=r_int,
        interior_differences=diffs,
        weighted_norms=norms,
        decay_exponents=[dg.decay_exponent for dg in diags],
        inverses=inverses,
    )


def near_identity(T: InvariantKernel, eps: float, R: int) -> InvariantKernel:
    """``I + eps T / ||T||_2`` with the norm estimated on ``B(e, R)``."""
    n2 = op_norm_2(T, R)
    return InvariantKernel.identity(T.group, T.coeff_dim) + (eps / n2) * T
