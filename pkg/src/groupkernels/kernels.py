"""Matrix-valued kernels on a group, their envelopes and weighted norms.

A kernel is an operator ``T = (t(g1, g2))`` on ``l^2(G, C^d)`` acting by

    (T xi)(g1) = sum_{g2} t(g1, g2) xi(g2).

Two representations are supported.

:class:`InvariantKernel`
    Left-invariant kernels ``t(g1, g2) = t(g2^{-1} g1)`` stored as a
    finitely supported table ``gamma -> t(gamma)``.  These describe exact
    operators on the infinite group.

:class:`WindowedKernel`
    A finite section: the block matrix of an operator compressed to the
    ball ``B(e, R)``.  Any kernel, invariant or not, can be represented on a
    window.

All norms factor through the *envelope* ``env(gamma) = sup ||t(g1, g2)||``
over pairs with ``g2^{-1} g1 = gamma``; the weighted norm with exponent ``a``
is the l^2 norm of ``env(gamma) (1 + l(gamma))^a``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .coefficients import CoefficientMatrix, op_norm, op_norms
from .errors import DimensionError, MismatchError, ResourceLimitError, ValidationError
from .groups import GroupElement, GroupModel

#: Coefficients with Frobenius norm below this are treated as absent.
ZERO_TOL = 1e-30

#: Largest dense finite section (rows of the block matrix) we agree to build.
MAX_DENSE_DIM = 12_000

# test hook: flips the sign of every weight exponent inside weighted_norm
_NEGATE_WEIGHT = False


@dataclass(frozen=True)
class Weight:
    """Polynomial weight ``u(gamma) = (1 + l(gamma))^a``."""

    exponent: float

    def __post_init__(self):
        a = float(self.exponent)
        if not math.isfinite(a) or a < 0:
            raise ValidationError(f"weight exponent must be a finite non-negative real, got {self.exponent}")
        object.__setattr__(self, "exponent", a)

    def __call__(self, length):
        return (1.0 + np.asarray(length, dtype=float)) ** self.exponent


def _as_weight(w) -> Weight:
    return w if isinstance(w, Weight) else Weight(w)


def _coeff_array(value, d: int | None = None) -> np.ndarray:
    if isinstance(value, CoefficientMatrix):
        a = value.entries
    else:
        a = np.asarray(value, dtype=np.complex128)
        if a.ndim == 0 and d is not None:
            a = a * np.eye(d, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"coefficient must be square, got shape {a.shape}")
    if d is not None and a.shape[0] != d:
        raise DimensionError(f"coefficient has dimension {a.shape[0]}, kernel expects {d}")
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Envelope:
    """Finitely supported map ``gamma -> env(gamma) >= 0`` with word lengths."""

    values: Mapping[GroupElement, float]
    lengths: Mapping[GroupElement, int]

    def __getitem__(self, gamma: GroupElement) -> float:
        return self.values.get(gamma, 0.0)

    def weighted_norm(self, w) -> float:
        a = _as_weight(w).exponent
        if _NEGATE_WEIGHT:
            a = -a
        terms = [v * (1.0 + self.lengths[g]) ** a for g, v in self.values.items()]
        scale = max(terms, default=0.0)
        if scale == 0.0 or not math.isfinite(scale):
            return scale
        # scaled sum of squares so large but finite norms do not overflow
        return scale * math.sqrt(math.fsum((t / scale) ** 2 for t in terms))

    def by_length(self) -> dict[int, float]:
        """Largest envelope value on each sphere ``l(gamma) = k``."""
        out: dict[int, float] = {}
        for g, v in self.values.items():
            k = self.lengths[g]
            out[k] = max(out.get(k, 0.0), v)
        return dict(sorted(out.items()))


# -- invariant kernels ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class InvariantKernel:
    """Left-invariant kernel given by a finitely supported table."""

    group: GroupModel
    coeff_dim: int
    table: Mapping[GroupElement, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        d = int(self.coeff_dim)
        if d < 1:
            raise ValidationError(f"coefficient dimension must be positive, got {self.coeff_dim}")
        clean = {}
        for g, value in self.table.items():
            self.group.validate(g)
            a = _coeff_array(value, d)
            if np.linalg.norm(a) >= ZERO_TOL:
                clean[g] = a
        order = sorted(clean, key=self.group.sort_key)
        object.__setattr__(self, "coeff_dim", d)
        object.__setattr__(self, "table", {g: clean[g] for g in order})

    # constructors
    @classmethod
    def identity(cls, group: GroupModel, d: int = 1, scale: complex = 1.0) -> "InvariantKernel":
        return cls(group, d, {group.identity(): scale * np.eye(d)})

    @classmethod
    def delta(cls, group: GroupModel, gamma: GroupElement, coeff) -> "InvariantKernel":
        a = _coeff_array(coeff)
        return cls(group, a.shape[0], {gamma: a})

    @classmethod
    def shift(cls, group: GroupModel, d: int = 1, scale: complex = 1.0, generator: int = 0) -> "InvariantKernel":
        """``scale * delta_s`` for the chosen generator ``s`` (default: the first)."""
        return cls(group, d, {group.generators[generator]: scale * np.eye(d)})

    # algebra
    def _check_compatible(self, other: "InvariantKernel") -> None:
        if not isinstance(other, InvariantKernel):
            raise MismatchError("expected an InvariantKernel")
        if other.group != self.group:
            raise MismatchError(f"kernels live on different groups: {self.group.spec} vs {other.group.spec}")
        if other.coeff_dim != self.coeff_dim:
            raise DimensionError(f"coefficient dimensions differ: {self.coeff_dim} vs {other.coeff_dim}")

    def __add__(self, other):
        self._check_compatible(other)
        table = dict(self.table)
        for g, a in other.table.items():
            table[g] = table[g] + a if g in table else a
        return InvariantKernel(self.group, self.coeff_dim, table)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return InvariantKernel(self.group, self.coeff_dim, {g: scalar * a for g, a in self.table.items()})

    __rmul__ = __mul__

    def __matmul__(self, other):
        return compose(self, other)

    @property
    def support(self) -> list[GroupElement]:
        return list(self.table)

    @property
    def propagation(self) -> int:
        return max((self.group.word_length(g) for g in self.table), default=0)

    @functools.cached_property
    def _envelope(self) -> Envelope:
        keys = list(self.table)
        if keys:
            norms = op_norms(np.stack([self.table[g] for g in keys]))
        else:
            norms = []
        return Envelope(
            {g: float(v) for g, v in zip(keys, norms)},
            {g: self.group.word_length(g) for g in keys},
        )

    def __getitem__(self, gamma: GroupElement) -> np.ndarray:
        return self.table.get(gamma, np.zeros((self.coeff_dim, self.coeff_dim), dtype=np.complex128))

    def allclose(self, other: "InvariantKernel", tol: float) -> bool:
        """Blockwise agreement within ``tol`` (max absolute entry difference)."""
        self._check_compatible(other)
        keys = set(self.table) | set(other.table)
        return all(np.max(np.abs(self[g] - other[g])) <= tol for g in keys)


# -- finite sections -----------------------------------------------------


class Window:
    """The ball ``B(e, R)`` with index maps and the diagonal of every index pair."""

    def __init__(self, group: GroupModel, radius: int):
        self.group = group
        self.radius = int(radius)
        self.elements = tuple(group.ball(self.radius))
        self.index = {g: i for i, g in enumerate(self.elements)}

    @property
    def size(self) -> int:
        return len(self.elements)

    @functools.cached_property
    def _diagonals(self):
        G = self.group
        inv = [G.inverse(g) for g in self.elements]
        label_of: dict[GroupElement, int] = {}
        labels = np.empty((self.size, self.size), dtype=np.int64)
        for i, gi in enumerate(self.elements):
            row = labels[i]
            for j, hj in enumerate(inv):
                gamma = G.multiply(hj, gi)
                k = label_of.get(gamma)
                if k is None:
                    k = label_of[gamma] = len(label_of)
                row[j] = k
        diagonals = list(label_of)
        lengths = np.array([G.word_length(g) for g in diagonals], dtype=np.int64)
        return labels, diagonals, lengths

    @property
    def labels(self) -> np.ndarray:
        """``labels[i, j]`` indexes :attr:`diagonals` at ``w_j^{-1} w_i``."""
        return self._diagonals[0]

    @property
    def diagonals(self) -> list[GroupElement]:
        return self._diagonals[1]

    @property
    def diagonal_lengths(self) -> np.ndarray:
        return self._diagonals[2]

    @property
    def pair_lengths(self) -> np.ndarray:
        """``d_l(w_i, w_j)`` for every index pair."""
        return self.diagonal_lengths[self.labels]

    def interior(self, r: int) -> int:
        """Number of leading window elements lying in ``B(e, r)``."""
        return sum(1 for g in self.elements if self.group.word_length(g) <= r)


@functools.lru_cache(maxsize=32)
def get_window(group: GroupModel, radius: int) -> Window:
    return Window(group, radius)


@dataclass(frozen=True, eq=False)
class WindowedKernel:
    """A kernel compressed to ``B(e, R)``, held as a dense block matrix.

    ``matrix`` has shape ``(n d, n d)`` with block ``(i, j)`` equal to
    ``t(w_i, w_j)`` for the ordered window elements ``w``.
    """

    group: GroupModel
    radius: int
    coeff_dim: int
    matrix: np.ndarray

    def __post_init__(self):
        n = self.window.size
        d = int(self.coeff_dim)
        m = np.array(self.matrix, dtype=np.complex128)
        if m.shape != (n * d, n * d):
            raise DimensionError(f"windowed matrix must have shape {(n * d, n * d)}, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "coeff_dim", d)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_blocks(cls, group, radius, coeff_dim, blocks: Mapping[tuple[int, int], object]):
        win = get_window(group, radius)
        d = coeff_dim
        m = np.zeros((win.size * d, win.size * d), dtype=np.complex128)
        for (i, j), value in blocks.items():
            if not (0 <= i < win.size and 0 <= j < win.size):
                raise ValidationError(f"block index {(i, j)} outside the window of size {win.size}")
            m[i * d:(i + 1) * d, j * d:(j + 1) * d] = _coeff_array(value, d)
        return cls(group, radius, d, m)

    @classmethod
    def identity(cls, group, radius, d=1, scale=1.0):
        n = get_window(group, radius).size
        return cls(group, radius, d, scale * np.eye(n * d))

    @property
    def window(self) -> Window:
        return get_window(self.group, self.radius)

    def block_array(self) -> np.ndarray:
        """View of the matrix as ``(n, n, d, d)`` blocks."""
        n, d = self.window.size, self.coeff_dim
        return self.matrix.reshape(n, d, n, d).transpose(0, 2, 1, 3)

    def _stored(self) -> np.ndarray:
        return np.any(self.block_array() != 0, axis=(2, 3))

    @property
    def blocks(self) -> dict[tuple[int, int], np.ndarray]:
        """Sparse map of stored (nonzero) blocks."""
        b = self.block_array()
        return {(int(i), int(j)): b[i, j] for i, j in zip(*np.nonzero(self._stored()))}

    @property
    def propagation(self) -> int:
        mask = self._stored()
        if not mask.any():
            return 0
        return int(self.window.pair_lengths[mask].max())

    def block(self, i: int, j: int) -> np.ndarray:
        return self.block_array()[i, j]

    def _check_compatible(self, other: "WindowedKernel") -> None:
        if not isinstance(other, WindowedKernel):
            raise MismatchError("expected a WindowedKernel")
        if other.group != self.group or other.radius != self.radius:
            raise MismatchError("windowed kernels live on different windows")
        if other.coeff_dim != self.coeff_dim:
            raise DimensionError(f"coefficient dimensions differ: {self.coeff_dim} vs {other.coeff_dim}")

    def __add__(self, other):
        self._check_compatible(other)
        return WindowedKernel(self.group, self.radius, self.coeff_dim, self.matrix + other.matrix)

    def __sub__(self, other):
        self._check_compatible(other)
        return WindowedKernel(self.group, self.radius, self.coeff_dim, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return WindowedKernel(self.group, self.radius, self.coeff_dim, scalar * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return compose_windowed(self, other)

    @functools.cached_property
    def _envelope(self) -> Envelope:
        win = self.window
        b = self.block_array()
        n, d = win.size, self.coeff_dim
        flat = b.reshape(n * n, d, d)
        labels = win.labels.reshape(-1)
        nz = np.flatnonzero(np.any(flat != 0, axis=(1, 2)))
        norms = op_norms(flat[nz]) if nz.size else np.zeros(0)
        env = np.zeros(len(win.diagonals))
        np.maximum.at(env, labels[nz], norms)
        values, lengths = {}, {}
        for k, g in enumerate(win.diagonals):
            if env[k] >= ZERO_TOL:
                values[g] = float(env[k])
                lengths[g] = int(win.diagonal_lengths[k])
        return Envelope(values, lengths)


Kernel = Union[InvariantKernel, WindowedKernel]


def window_kernel(T: InvariantKernel, R: int) -> WindowedKernel:
    """Finite section of an invariant kernel on ``B(e, R)``."""
    G, d = T.group, T.coeff_dim
    win = get_window(G, R)
    n = win.size
    if n * d > MAX_DENSE_DIM:
        raise ResourceLimitError(
            f"finite section on B(e,{R}) would have {n * d} rows (limit {MAX_DENSE_DIM})", cardinality=n * d
        )
    m = np.zeros((n * d, n * d), dtype=np.complex128)
    items = [(G.inverse(g), a) for g, a in T.table.items()]
    for i, wi in enumerate(win.elements):
        for ginv, a in items:
            j = win.index.get(G.multiply(wi, ginv))
            if j is not None:
                m[i * d:(i + 1) * d, j * d:(j + 1) * d] = a
    return WindowedKernel(G, R, d, m)


# -- operations ----------------------------------------------------------


def envelope(T: Kernel) -> Envelope:
    return T._envelope


def weighted_norm(T: Kernel, w) -> float:
    """``sqrt(sum_gamma env(gamma)^2 (1 + l(gamma))^{2a})``."""
    return envelope(T).weighted_norm(w)


def propagation(T: Kernel) -> int:
    return T.propagation


def compose(T: InvariantKernel, S: InvariantKernel) -> InvariantKernel:
    """Kernel of the operator product ``T S``.

    With ``t(g1, g2) = t(g2^{-1} g1)`` the product kernel is
    ``(ts)(gamma) = sum_{beta alpha = gamma} t(alpha) s(beta)``.
    """
    T._check_compatible(S)
    G = T.group
    acc: dict[GroupElement, np.ndarray] = {}
    for alpha, ta in T.table.items():
        for beta, sb in S.table.items():
            gamma = G.multiply(beta, alpha)
            prod = ta @ sb
            if gamma in acc:
                acc[gamma] = acc[gamma] + prod
            else:
                acc[gamma] = prod
    return InvariantKernel(G, T.coeff_dim, acc)


def compose_windowed(T: WindowedKernel, S: WindowedKernel) -> WindowedKernel:
    """Block-matrix product on a shared window.

    Only blocks whose rows lie at least ``propagation(T)`` away from the
    window boundary agree with the infinite composition.
    """
    T._check_compatible(S)
    return WindowedKernel(T.group, T.radius, T.coeff_dim, T.matrix @ S.matrix)


def adjoint_kernel(T: Kernel) -> Kernel:
    if isinstance(T, InvariantKernel):
        G = T.group
        return InvariantKernel(G, T.coeff_dim, {G.inverse(g): a.conj().T for g, a in T.table.items()})
    return WindowedKernel(T.group, T.radius, T.coeff_dim, T.matrix.conj().T)


def truncate(T: Kernel, n: int) -> Kernel:
    """Drop every entry with ``d_l(g1, g2) > n``."""
    if n < 0:
        raise ValidationError(f"truncation radius must be non-negative, got {n}")
    if isinstance(T, InvariantKernel):
        G = T.group
        return InvariantKernel(G, T.coeff_dim, {g: a for g, a in T.table.items() if G.word_length(g) <= n})
    win, d = T.window, T.coeff_dim
    keep = np.repeat(np.repeat(win.pair_lengths <= n, d, axis=0), d, axis=1)
    return WindowedKernel(T.group, T.radius, d, np.where(keep, T.matrix, 0.0))


def _zigzag(k: int) -> int:
    return 2 * k if k >= 0 else -2 * k - 1


def element_rng(seed: int, gamma: GroupElement) -> np.random.Generator:
    """Deterministic stream for one group element."""
    entropy = [_zigzag(int(seed)), len(gamma.canonical)] + [_zigzag(c) for c in gamma.canonical]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def random_kernel(G: GroupModel, R: int, s: float, d: int, seed: int) -> InvariantKernel:
    """Random kernel on ``B(e, R)`` with envelope exactly ``(1 + l(gamma))^{-s}``.

    Each coefficient is a complex Gaussian matrix rescaled to unit operator
    norm, drawn from a stream seeded by ``(seed, gamma)``; enlarging ``R``
    leaves existing entries unchanged.
    """
    if R < 0 or s < 0 or d < 1:
        raise ValidationError(f"random_kernel needs R >= 0, s >= 0, d >= 1 (got R={R}, s={s}, d={d})")
    table = {}
    for g in G.ball(R):
        rng = element_rng(seed, g)
        raw = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        unit = raw / op_norm(raw)
        table[g] = (1.0 + G.word_length(g)) ** (-s) * unit
    return InvariantKernel(G, d, table)


def apply(T: InvariantKernel, xi: Mapping[GroupElement, np.ndarray]) -> dict[GroupElement, np.ndarray]:
    """Genuine block action ``(T xi)(g1) = sum_{g2} t(g2^{-1} g1) xi(g2)``."""
    G = T.group
    out: dict[GroupElement, np.ndarray] = {}
    for g2, v in xi.items():
        v = np.asarray(v, dtype=np.complex128)
        for gamma, a in T.table.items():
            g1 = G.multiply(g2, gamma)
            out[g1] = out[g1] + a @ v if g1 in out else a @ v
    return out


def apply_majorant(T: InvariantKernel, eta: Mapping[GroupElement, float]) -> dict[GroupElement, float]:
    """Scalar dominating action ``sum_{g2} ||t(g2^{-1} g1)|| eta(g2)``.

    For ``eta = |xi|`` this bounds ``|(T xi)(g1)|`` pointwise and is the
    operator the Schur test estimates.
    """
    G = T.group
    env = envelope(T)
    out: dict[GroupElement, float] = {}
    for g2, v in eta.items():
        for gamma, norm in env.values.items():
            g1 = G.multiply(g2, gamma)
            out[g1] = out.get(g1, 0.0) + norm * float(v)
    return out
