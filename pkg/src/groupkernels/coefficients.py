"""The coefficient algebra: d x d complex matrices with the operator norm.

Norms are computed by power iteration on ``X^* X`` from a deterministic
start vector.  :func:`dominant_eigenvalues` runs the iteration on a whole
stack of Hermitian positive semi-definite matrices at once, which is how the
kernel code evaluates envelopes with thousands of coefficient blocks.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, ValidationError

DEFAULT_TOL = 1e-12
MAX_ITER = 10_000


class CoefficientMatrix:
    """An immutable element of the coefficient algebra."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValidationError(f"coefficient must be a non-empty square matrix, got shape {a.shape}")
        a.setflags(write=False)
        self.entries = a

    @classmethod
    def identity(cls, d: int) -> "CoefficientMatrix":
        return cls(np.eye(d))

    @classmethod
    def zeros(cls, d: int) -> "CoefficientMatrix":
        return cls(np.zeros((d, d)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        _check_dims(self, other)
        return CoefficientMatrix(self.entries + other.entries)

    def __mul__(self, scalar):
        return CoefficientMatrix(self.entries * scalar)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, CoefficientMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(np.all(self.entries == other.entries))

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"CoefficientMatrix({self.entries.tolist()!r})"

    def adjoint(self) -> "CoefficientMatrix":
        return adjoint(self)

    def norm(self, tol: float = DEFAULT_TOL) -> float:
        return op_norm(self, tol)


def _check_dims(X: CoefficientMatrix, Y: CoefficientMatrix) -> None:
    if X.dim != Y.dim:
        raise DimensionError(f"coefficient dimensions differ: {X.dim} vs {Y.dim}")


def matmul(X: CoefficientMatrix, Y: CoefficientMatrix) -> CoefficientMatrix:
    _check_dims(X, Y)
    return CoefficientMatrix(X.entries @ Y.entries)


def adjoint(X: CoefficientMatrix) -> CoefficientMatrix:
    return CoefficientMatrix(X.entries.conj().T)


def op_norm(X, tol: float = DEFAULT_TOL) -> float:
    """Largest singular value of ``X``; the zero matrix has norm 0."""
    a = X.entries if isinstance(X, CoefficientMatrix) else np.asarray(X, dtype=np.complex128)
    return float(op_norms(a[None], tol)[0])


def op_norms(stack: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Operator norms of a stack of square matrices with shape ``(m, d, d)``."""
    stack = np.asarray(stack)
    if stack.shape[0] == 0:
        return np.zeros(0)
    if stack.shape[-1] == 1:
        return np.abs(stack[:, 0, 0]).astype(float)
    gram = np.conj(np.swapaxes(stack, -1, -2)) @ stack
    return np.sqrt(np.maximum(dominant_eigenvalues(gram, tol), 0.0))


def spectral_norm(M: np.ndarray, tol: float = 1e-10) -> float:
    """Largest singular value of one (possibly large) dense matrix."""
    M = np.asarray(M)
    gram = M.conj().T @ M
    return float(np.sqrt(max(dominant_eigenvalues(gram[None], tol)[0], 0.0)))


def _starts(n: int, alternating: bool) -> np.ndarray:
    v = np.ones(n, dtype=np.complex128)
    if alternating:
        v[1::2] = -1.0
    return v / np.sqrt(n)


def _power_single(B: np.ndarray, v0: np.ndarray, tol: float, max_iter: int):
    """Scalar-bookkeeping twin of :func:`_power_batch` for one matrix."""
    v = v0.copy()
    prev = prev_delta = math.nan
    th = 0.0
    for it in range(max_iter):
        w = B @ v
        th = float(np.vdot(v, w).real)
        nw = math.sqrt(float(np.vdot(w, w).real))
        if nw == 0.0:
            return th, True
        v = w / nw
        delta = abs(th - prev)
        if prev_delta > 0:
            ratio = min(delta / prev_delta, 0.999)
        else:
            ratio = 0.999 if prev_delta == 0 and delta > 0 else 0.0
        scale = tol * abs(th)
        if it >= 2 and delta <= scale and delta * ratio / (1.0 - ratio) <= scale:
            return th, True
        prev, prev_delta = th, delta
    return th, False


def _power_batch(B: np.ndarray, v0: np.ndarray, tol: float, max_iter: int):
    """Power iteration on every matrix of a Hermitian PSD stack.

    Convergence for each item requires the change of the Rayleigh quotient,
    and its geometric extrapolation to the limit, to drop below
    ``tol * theta``.  Returns Rayleigh quotients and a converged mask.
    """
    m, n, _ = B.shape
    if m == 1:
        th, ok = _power_single(B[0], v0, tol, max_iter)
        return np.array([th]), np.array([ok])
    theta = np.zeros(m)
    converged = np.zeros(m, dtype=bool)
    active = np.arange(m)
    v = np.broadcast_to(v0, (m, n)).copy()
    prev = np.full(m, np.nan)
    prev_delta = np.full(m, np.nan)
    Ba = B
    for it in range(max_iter):
        w = (Ba @ v[active][..., None])[..., 0]
        th = np.real(np.sum(np.conj(v[active]) * w, axis=1))
        nw = np.linalg.norm(w, axis=1)
        collapsed = nw == 0.0
        safe = np.where(collapsed, 1.0, nw)
        v[active] = w / safe[:, None]
        delta = np.abs(th - prev[active])
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.nan_to_num(np.clip(delta / prev_delta[active], 0.0, 0.999))
        extrapolated = delta * ratio / (1.0 - ratio)
        scale = tol * np.abs(th)
        done = collapsed | ((it >= 2) & (delta <= scale) & (extrapolated <= scale))
        theta[active] = th
        prev[active] = th
        prev_delta[active] = delta
        if done.any():
            converged[active[done]] = True
            active = active[~done]
            if active.size == 0:
                break
            Ba = B[active]
    return theta, converged


def dominant_eigenvalues(B: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> np.ndarray:
    """Largest eigenvalue of each Hermitian positive semi-definite matrix in ``B``.

    Items that fail to converge, or whose result falls below the mean
    eigenvalue (a start vector deflated against the top eigenvector), are
    rerun from an alternating +-1 start.  Whatever still fails is settled by
    a dense eigen-decomposition.
    """
    if not tol > 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    B = np.asarray(B, dtype=np.complex128)
    m, n, _ = B.shape
    trace_mean = np.real(np.trace(B, axis1=1, axis2=2)) / n

    def ok(theta, conv):
        return conv & (theta >= trace_mean * (1 - 1e-9))

    theta, conv = _power_batch(B, _starts(n, False), tol, max_iter)
    good = ok(theta, conv)
    if not good.all():
        idx = np.flatnonzero(~good)
        th2, conv2 = _power_batch(B[idx], _starts(n, True), tol, max_iter)
        good2 = ok(th2, conv2)
        theta[idx[good2]] = th2[good2]
        bad = idx[~good2]
        if bad.size:
            theta[bad] = np.linalg.eigvalsh(B[bad])[:, -1]
    return theta
