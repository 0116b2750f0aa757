"""Finitely generated groups with a word metric.

Three concrete models are provided:

* :class:`IntegerLattice` -- the free abelian group Z^d with the standard
  basis vectors and their negatives as generators (polynomial growth of
  degree d);
* :class:`Heisenberg3` -- the discrete Heisenberg group realized on integer
  triples with ``(x, y, z)(x', y', z') = (x + x', y + y', z + z' + x y')``
  and generators ``x^{+-1}, y^{+-1}`` (polynomial growth of degree 4);
* :class:`FreeGroup` -- the free group on ``k >= 2`` letters (exponential
  growth).

Elements are :class:`GroupElement` values holding a canonical integer tuple.
For lattices and the Heisenberg group this is the coordinate vector; for
free groups it is the freely reduced word, letter ``i`` encoded as ``i + 1``
and its inverse as ``-(i + 1)``.

Word lengths are Cayley-graph distances from the identity.  Lattices and
free groups use closed forms; the Heisenberg group uses a breadth-first
search whose layers are memoized in a process-wide cache.
"""

from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import MalformedElementError, ResourceLimitError, ValidationError

#: Default cap on the number of elements a single enumeration may produce.
DEFAULT_BUDGET = 2_000_000

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True, order=True)
class GroupElement:
    """An element in canonical form; equality is equality of canonical forms."""

    canonical: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "canonical", tuple(int(c) for c in self.canonical))


@dataclass(frozen=True)
class GrowthReport:
    radii: list[int]
    ball_sizes: list[int]
    degree_estimate: float
    growth_constant: float
    classified_polynomial: bool
    residual_polynomial: float = 0.0
    residual_exponential: float = 0.0


class GroupModel:
    """Common interface of the concrete group models."""

    kind: str = ""

    # -- structure -----------------------------------------------------
    def identity(self) -> GroupElement:
        raise NotImplementedError

    @property
    def generators(self) -> tuple[GroupElement, ...]:
        raise NotImplementedError

    def multiply(self, g: GroupElement, h: GroupElement) -> GroupElement:
        raise NotImplementedError

    def inverse(self, g: GroupElement) -> GroupElement:
        raise NotImplementedError

    def validate(self, g: GroupElement) -> None:
        raise NotImplementedError

    @property
    def spec(self) -> str:
        """The group specification string, e.g. ``"Z^2"``."""
        raise NotImplementedError

    # -- metric --------------------------------------------------------
    def word_length(self, g: GroupElement) -> int:
        raise NotImplementedError

    def metric(self, g: GroupElement, h: GroupElement) -> int:
        return self.word_length(self.multiply(self.inverse(h), g))

    def ball(self, r: int, budget: int = DEFAULT_BUDGET) -> list[GroupElement]:
        """All elements of length at most ``r``, sorted by (length, canonical form)."""
        if r < 0:
            raise ValidationError(f"ball radius must be non-negative, got {r}")
        elements = self._enumerate_ball(int(r), budget)
        return sorted(elements, key=self.sort_key)

    def _enumerate_ball(self, r: int, budget: int) -> list[GroupElement]:
        raise NotImplementedError

    def ball_cardinality(self, r: int) -> int | None:
        """Closed-form ``#B(e, r)`` when one is known, else ``None``."""
        return None

    def sort_key(self, g: GroupElement) -> tuple[int, tuple[int, ...]]:
        return (self.word_length(g), g.canonical)

    # -- conveniences --------------------------------------------------
    def element(self, *canonical: int) -> GroupElement:
        g = GroupElement(tuple(canonical))
        self.validate(g)
        return g

    def parse_element(self, text: str) -> GroupElement:
        nums = re.findall(r"-?\d+", text)
        if not nums and text.strip() not in ("", "e"):
            raise MalformedElementError(f"cannot parse element {text!r} of {self.spec}")
        if not nums:
            return self.identity()
        return self.element(*map(int, nums))

    def format_element(self, g: GroupElement) -> str:
        return "(" + ",".join(str(c) for c in g.canonical) + ")"

    def product(self, elements: Iterable[GroupElement]) -> GroupElement:
        out = self.identity()
        for g in elements:
            out = self.multiply(out, g)
        return out

    def _check_budget(self, cardinality: int, budget: int, r: int) -> None:
        if cardinality > budget:
            raise ResourceLimitError(
                f"ball B(e,{r}) in {self.spec} has {cardinality} elements, "
                f"exceeding the budget of {budget}",
                cardinality=cardinality,
            )


@dataclass(frozen=True)
class IntegerLattice(GroupModel):
    rank: int = 1
    kind: str = field(default="IntegerLattice", init=False)

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ValidationError(f"lattice rank must be positive, got {self.rank}")

    @property
    def spec(self) -> str:
        return f"Z^{self.rank}"

    def identity(self) -> GroupElement:
        return GroupElement((0,) * self.rank)

    @property
    def generators(self) -> tuple[GroupElement, ...]:
        gens = []
        for i in range(self.rank):
            for sign in (1, -1):
                v = [0] * self.rank
                v[i] = sign
                gens.append(GroupElement(tuple(v)))
        return tuple(gens)

    def validate(self, g: GroupElement) -> None:
        if not isinstance(g, GroupElement) or len(g.canonical) != self.rank:
            raise MalformedElementError(f"{g!r} is not an element of {self.spec}")

    def multiply(self, g, h):
        return GroupElement(tuple(a + b for a, b in zip(g.canonical, h.canonical)))

    def inverse(self, g):
        return GroupElement(tuple(-a for a in g.canonical))

    def word_length(self, g):
        self.validate(g)
        return sum(abs(a) for a in g.canonical)

    def ball_cardinality(self, r):
        # number of integer points with l1 norm <= r
        return sum(2**k * math.comb(self.rank, k) * math.comb(r, k) for k in range(self.rank + 1))

    def _enumerate_ball(self, r, budget):
        self._check_budget(self.ball_cardinality(r), budget, r)
        out: list[GroupElement] = []

        def rec(prefix: list[int], remaining: int, slots: int):
            if slots == 0:
                out.append(GroupElement(tuple(prefix)))
                return
            for a in range(-remaining, remaining + 1):
                prefix.append(a)
                rec(prefix, remaining - abs(a), slots - 1)
                prefix.pop()

        rec([], r, self.rank)
        return out


class _LayeredBFS:
    """Memoized breadth-first layers of a Cayley graph.

    Concurrent callers may race to extend the layers; a lock makes the
    extension atomic so every caller observes the same table.
    """

    def __init__(self, model: GroupModel):
        self.model = model
        e = model.identity()
        self.layers: list[list[GroupElement]] = [[e]]
        self.dist: dict[GroupElement, int] = {e: 0}
        self.lock = threading.Lock()

    @property
    def radius(self) -> int:
        return len(self.layers) - 1

    def extend_to(self, r: int, budget: int) -> None:
        if self.radius >= r:
            return
        with self.lock:
            gens = self.model.generators
            while self.radius < r:
                nxt = []
                k = self.radius + 1
                for g in self.layers[-1]:
                    for s in gens:
                        h = self.model.multiply(g, s)
                        if h not in self.dist:
                            nxt.append(h)
                            self.dist[h] = k
                if len(self.dist) > budget:
                    for h in nxt:
                        del self.dist[h]
                    raise ResourceLimitError(
                        f"ball B(e,{k}) in {self.model.spec} has more than {budget} elements",
                        cardinality=len(self.dist) + len(nxt),
                    )
                self.layers.append(nxt)

    def length(self, g: GroupElement, budget: int) -> int:
        while g not in self.dist:
            self.extend_to(self.radius + 1, budget)
        return self.dist[g]


_H3_CACHE: _LayeredBFS | None = None
_H3_LOCK = threading.Lock()


@dataclass(frozen=True)
class Heisenberg3(GroupModel):
    kind: str = field(default="Heisenberg3", init=False)

    @property
    def spec(self) -> str:
        return "H3"

    def identity(self):
        return GroupElement((0, 0, 0))

    @property
    def generators(self):
        return (
            GroupElement((1, 0, 0)),
            GroupElement((-1, 0, 0)),
            GroupElement((0, 1, 0)),
            GroupElement((0, -1, 0)),
        )

    def validate(self, g):
        if not isinstance(g, GroupElement) or len(g.canonical) != 3:
            raise MalformedElementError(f"{g!r} is not an element of H3")

    def multiply(self, g, h):
        x, y, z = g.canonical
        u, v, w = h.canonical
        return GroupElement((x + u, y + v, z + w + x * v))

    def inverse(self, g):
        x, y, z = g.canonical
        return GroupElement((-x, -y, -z + x * y))

    def _bfs(self) -> _LayeredBFS:
        global _H3_CACHE
        if _H3_CACHE is None:
            with _H3_LOCK:
                if _H3_CACHE is None:
                    _H3_CACHE = _LayeredBFS(Heisenberg3())
        return _H3_CACHE

    def word_length(self, g, budget: int = DEFAULT_BUDGET):
        self.validate(g)
        return self._bfs().length(g, budget)

    def _enumerate_ball(self, r, budget):
        bfs = self._bfs()
        bfs.extend_to(r, budget)
        out = []
        for layer in bfs.layers[: r + 1]:
            out.extend(layer)
        self._check_budget(len(out), budget, r)
        return out


@dataclass(frozen=True)
class FreeGroup(GroupModel):
    rank: int = 2
    kind: str = field(default="FreeGroup", init=False)

    def __post_init__(self):
        if not 2 <= int(self.rank) <= len(_LETTERS):
            raise ValidationError(f"free group rank must be in [2, 26], got {self.rank}")

    @property
    def spec(self):
        return f"F{self.rank}"

    def identity(self):
        return GroupElement(())

    @property
    def generators(self):
        gens = []
        for i in range(1, self.rank + 1):
            gens.extend([GroupElement((i,)), GroupElement((-i,))])
        return tuple(gens)

    def validate(self, g):
        if not isinstance(g, GroupElement):
            raise MalformedElementError(f"{g!r} is not a group element")
        w = g.canonical
        for i, c in enumerate(w):
            if c == 0 or abs(c) > self.rank:
                raise MalformedElementError(f"letter {c} is not a generator of {self.spec}")
            if i and w[i - 1] == -c:
                raise MalformedElementError(f"word {self.format_element(g)} is not freely reduced")

    @staticmethod
    def reduce(word: Sequence[int]) -> tuple[int, ...]:
        stack: list[int] = []
        for c in word:
            if stack and stack[-1] == -c:
                stack.pop()
            else:
                stack.append(c)
        return tuple(stack)

    def multiply(self, g, h):
        return GroupElement(self.reduce(g.canonical + h.canonical))

    def inverse(self, g):
        return GroupElement(tuple(-c for c in reversed(g.canonical)))

    def word_length(self, g):
        self.validate(g)
        return len(g.canonical)

    def ball_cardinality(self, r):
        k = self.rank
        if r == 0:
            return 1
        return 1 + sum(2 * k * (2 * k - 1) ** (n - 1) for n in range(1, r + 1))

    def _enumerate_ball(self, r, budget):
        self._check_budget(self.ball_cardinality(r), budget, r)
        letters = [c for i in range(1, self.rank + 1) for c in (i, -i)]
        layer = [()]
        out = [GroupElement(())]
        for _ in range(r):
            layer = [w + (c,) for w in layer for c in letters if not (w and w[-1] == -c)]
            out.extend(GroupElement(w) for w in layer)
        return out

    def parse_element(self, text: str) -> GroupElement:
        s = text.strip().replace("⁻¹", "^-1")
        if s in ("", "e", "1"):
            return self.identity()
        word = []
        for m in re.finditer(r"([A-Za-z])(\^-1)?|(\S)", s):
            if m.group(3):
                raise MalformedElementError(f"cannot parse word {text!r}")
            ch = m.group(1)
            i = _LETTERS.index(ch.lower()) + 1
            if i > self.rank:
                raise MalformedElementError(f"letter {ch!r} is not a generator of {self.spec}")
            sign = -1 if (ch.isupper()) != bool(m.group(2)) else 1
            word.append(sign * i)
        return GroupElement(self.reduce(word))

    def format_element(self, g):
        if not g.canonical:
            return "e"
        return "".join(
            _LETTERS[abs(c) - 1] + ("^-1" if c < 0 else "") for c in g.canonical
        )


def parse_group(spec: str) -> GroupModel:
    """Build a model from a specification string ``Z^<d>``, ``H3`` or ``F<k>``."""
    s = spec.strip()
    m = re.fullmatch(r"Z(?:\^(\d+))?", s)
    if m:
        return IntegerLattice(int(m.group(1) or 1))
    if s.upper() == "H3":
        return Heisenberg3()
    m = re.fullmatch(r"F(\d+)", s)
    if m:
        return FreeGroup(int(m.group(1)))
    raise ValidationError(f"unknown group specification {spec!r}; expected Z^<d>, H3 or F<k>")


# -- functional API ------------------------------------------------------


def word_length(G: GroupModel, g: GroupElement) -> int:
    return G.word_length(g)


def metric(G: GroupModel, g: GroupElement, h: GroupElement) -> int:
    """Left-invariant word metric ``l(h^{-1} g)``."""
    G.validate(g)
    G.validate(h)
    return G.metric(g, h)


def ball(G: GroupModel, r: int, budget: int = DEFAULT_BUDGET) -> list[GroupElement]:
    return G.ball(r, budget)


def ball_sizes(G: GroupModel, r_max: int, budget: int = DEFAULT_BUDGET) -> list[int]:
    """``#B(e, r)`` for ``r = 0..r_max`` from a single enumeration."""
    elements = G.ball(r_max, budget)
    counts = np.bincount([G.word_length(g) for g in elements], minlength=r_max + 1)
    return [int(c) for c in np.cumsum(counts)]


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sum((A @ coef - y) ** 2))
    return float(coef[0]), float(coef[1]), resid


def growth_analysis(G: GroupModel, r_max: int, budget: int = DEFAULT_BUDGET) -> GrowthReport:
    """Fit ``#B(e,r) ~ c (1+r)^t`` and decide polynomial against exponential growth.

    The degree is the least-squares slope of ``log #B`` against ``log(1+r)``
    over ``r`` in ``[ceil(r_max/2), r_max]``.  The group is classified as
    polynomial when that log-log fit has a smaller squared residual than a
    straight-line fit of ``log #B`` against ``r`` on the same range.
    """
    if r_max < 4:
        raise ValidationError(f"growth analysis needs r_max >= 4, got {r_max}")
    sizes = ball_sizes(G, r_max, budget)
    radii = list(range(r_max + 1))
    lo = math.ceil(r_max / 2)
    r = np.arange(lo, r_max + 1, dtype=float)
    logb = np.log(np.asarray(sizes[lo:], dtype=float))
    slope, intercept, res_poly = _linear_fit(np.log1p(r), logb)
    _, _, res_exp = _linear_fit(r, logb)
    return GrowthReport(
        radii=radii,
        ball_sizes=sizes,
        degree_estimate=slope,
        growth_constant=math.exp(intercept),
        classified_polynomial=res_poly < res_exp,
        residual_polynomial=res_poly,
        residual_exponential=res_exp,
    )
