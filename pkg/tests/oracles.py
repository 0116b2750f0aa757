"""Independent reference implementations used only by the tests.

These deliberately avoid the library's own fast paths: balls come from a
plain breadth-first search over the Cayley graph, matrix products from
triple loops, norms from LAPACK singular values, and windowed operators are
assembled entry by entry from the kernel table.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

ZETA3 = 1.2020569031595942853997
ZETA4 = math.pi**4 / 90


def bfs_lengths(G, r_max: int) -> dict:
    """Word lengths of every element with length <= r_max."""
    e = G.identity()
    dist = {e: 0}
    queue = deque([e])
    gens = G.generators
    while queue:
        g = queue.popleft()
        if dist[g] == r_max:
            continue
        for s in gens:
            h = G.multiply(g, s)
            if h not in dist:
                dist[h] = dist[g] + 1
                queue.append(h)
    return dist


def bfs_ball_sizes(G, r_max: int) -> list[int]:
    dist = bfs_lengths(G, r_max)
    counts = [0] * (r_max + 1)
    for d in dist.values():
        counts[d] += 1
    return list(np.cumsum(counts).astype(int))


def lattice_ball_size(d: int, r: int) -> int:
    # count integer points with l1 norm <= r by dynamic programming over coordinates
    ways = [1] + [0] * r
    for _ in range(d):
        new = [0] * (r + 1)
        for used in range(r + 1):
            if ways[used]:
                for c in range(-(r - used), r - used + 1):
                    new[used + abs(c)] += ways[used]
        ways = new
    return sum(ways)


def naive_matmul(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    n, m = X.shape[0], Y.shape[1]
    out = np.zeros((n, m), dtype=complex)
    for i in range(n):
        for j in range(m):
            acc = 0j
            for k in range(X.shape[1]):
                acc += X[i, k] * Y[k, j]
            out[i, j] = acc
    return out


def svd_norm(X) -> float:
    return float(np.linalg.svd(np.asarray(X), compute_uv=False)[0]) if np.asarray(X).size else 0.0


def ordered_ball(G, R: int) -> list:
    dist = bfs_lengths(G, R)
    return sorted(dist, key=lambda g: (dist[g], g.canonical))


def dense_section(T, R: int) -> np.ndarray:
    """Finite section of an invariant kernel: block (i, j) = t(w_j^-1 w_i)."""
    G, d = T.group, T.coeff_dim
    W = ordered_ball(G, R)
    out = np.zeros((len(W) * d, len(W) * d), dtype=complex)
    for i, wi in enumerate(W):
        for j, wj in enumerate(W):
            gamma = G.multiply(G.inverse(wj), wi)
            if gamma in T.table:
                out[i * d:(i + 1) * d, j * d:(j + 1) * d] = T.table[gamma]
    return out


def weighted_norm_from_table(T, a: float) -> float:
    G = T.group
    return math.sqrt(
        math.fsum(svd_norm(m) ** 2 * (1 + G.word_length(g)) ** (2 * a) for g, m in T.table.items())
    )


def schur_sum_exact_Z(a: float, terms: int = 200000) -> float:
    """Sum over n of (2n + 3)(1 + n)^(-2a) with an integral tail."""
    n = np.arange(terms, dtype=float)
    head = math.fsum((2 * n + 3) * (1 + n) ** (-2 * a))
    N = terms + 1.0
    tail = 2 * N ** (2 - 2 * a) / (2 * a - 2) + N ** (1 - 2 * a) / (2 * a - 1)
    return head + tail
