"""Constant-degree expanders from unions of random perfect matchings.

A graph on ``n`` vertices is an ``(n, alpha, beta)``-expander when every set of
``ceil(alpha * n)`` vertices has more than ``beta * n`` neighbours.  With
``closed=True`` a set counts itself among its neighbours, which is what the
propagation argument needs (a party that sends a certificate also holds it) and
makes the property attainable on very small committees.  The
propagation graph for a fault fraction ``1/2 - epsilon`` needs
``alpha = 2 * epsilon`` and ``beta = 1 - 2 * epsilon``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**6
DEFAULT_SAMPLES = 2000
MAX_RETRIES = 200


class ExpanderError(Exception):
    pass


class InstanceTooLarge(ExpanderError):
    pass


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**6)
    return Fraction(x)


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; ``seed`` may be an int or a tuple of ints."""
    if isinstance(seed, tuple):
        seed = list(seed)
    return np.random.Generator(np.random.PCG64(seed))


def log_bound(c: float, d: int) -> float:
    """Natural log of (e/c)^c (e/(1-c))^(1-c) (1-c)^(c d / 2)."""
    return (c * math.log(math.e / c)
            + (1 - c) * math.log(math.e / (1 - c))
            + c * d / 2 * math.log(1 - c))


def min_degree(epsilon) -> int:
    """Smallest number of matchings that drives the union bound below 1."""
    eps = float(as_fraction(epsilon))
    if not 0 < eps < 0.5:
        raise ExpanderError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    c = 2 * eps
    head = c * math.log(math.e / c) + (1 - c) * math.log(math.e / (1 - c))
    d = max(1, math.floor(2 * head / (-c * math.log(1 - c))))
    while log_bound(c, d) >= 0:
        d += 1
    while d > 1 and log_bound(c, d - 1) < 0:
        d -= 1
    return d


def random_perfect_matching(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform perfect matching via Fisher-Yates; for odd n vertex 0 gets two edges."""
    if n < 2:
        raise ExpanderError("a matching needs at least two vertices")
    if n % 2 == 0:
        order = list(range(n))
    else:
        order = list(range(1, n))
    for i in range(len(order) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    edges = []
    if n % 2:
        edges += [(0, order[0]), (0, order[1])]
        order = order[2:]
    edges += [(order[i], order[i + 1]) for i in range(0, len(order), 2)]
    return edges


@dataclass(frozen=True)
class ExpanderGraph:
    n: int
    epsilon: Fraction
    degree: int
    adjacency: tuple
    verified: str = "none"
    retries: int = 0

    def neighbors(self, v: int) -> frozenset:
        return self.adjacency[v]

    def max_degree(self) -> int:
        return max(len(a) for a in self.adjacency)

    def masks(self, closed: bool = False) -> list[int]:
        return [sum(1 << u for u in a) | (closed << v) for v, a in enumerate(self.adjacency)]


def _union(n: int, d: int, rng) -> tuple:
    adj = [set() for _ in range(n)]
    for _ in range(d):
        for a, b in random_perfect_matching(n, rng):
            adj[a].add(b)
            adj[b].add(a)
    return tuple(frozenset(a) for a in adj)


def _subset_size(n: int, alpha) -> int:
    return math.ceil(as_fraction(alpha) * n)


def _check_ab(alpha, beta):
    a, b = as_fraction(alpha), as_fraction(beta)
    # alpha == beta is allowed: epsilon = 1/4 gives alpha = beta = 1/2
    if not 0 < a <= b < 1:
        raise ExpanderError(f"need 0 < alpha <= beta < 1, got {alpha}, {beta}")
    return a, b


def verify_expansion(g: ExpanderGraph, alpha, beta, budget: int = DEFAULT_BUDGET,
                     closed: bool = False) -> bool:
    """Exhaustively check that every ceil(alpha n)-subset has > beta n neighbours."""
    a, b = _check_ab(alpha, beta)
    n = g.n
    k = _subset_size(n, a)
    total = math.comb(n, k)
    if total > budget:
        raise InstanceTooLarge(f"C({n},{k}) = {total} subsets exceeds budget {budget}")
    need = math.floor(b * n) + 1
    masks = g.masks(closed)

    # depth-first over sorted subsets, carrying the running neighbourhood mask
    def dfs(start: int, left: int, acc: int) -> bool:
        if left == 0:
            return acc.bit_count() >= need
        for v in range(start, n - left + 1):
            if not dfs(v + 1, left - 1, acc | masks[v]):
                return False
        return True

    return dfs(0, k, 0)


def sample_expansion(g: ExpanderGraph, alpha, beta, samples: int, rng, closed: bool = False) -> bool:
    """Check random ceil(alpha n)-subsets only."""
    a, b = _check_ab(alpha, beta)
    n = g.n
    k = _subset_size(n, a)
    need = math.floor(b * n) + 1
    masks = g.masks(closed)
    for _ in range(samples):
        acc = 0
        for v in rng.choice(n, size=k, replace=False):
            acc |= masks[int(v)]
        if acc.bit_count() < need:
            return False
    return True


def _attainable(n: int, alpha, beta, closed: bool) -> bool:
    # in K_n a lone vertex reaches the other n - 1; any larger set reaches all n
    k = _subset_size(n, alpha)
    reach = n - 1 if k == 1 and not closed else n
    return reach > beta * n


def build(n: int, epsilon, seed, budget: int = DEFAULT_BUDGET, samples: int = DEFAULT_SAMPLES,
          max_retries: int = MAX_RETRIES, closed: bool = False) -> ExpanderGraph:
    """Union of ``min_degree(epsilon)`` random perfect matchings, re-drawn until it expands.

    Small instances are verified exhaustively; larger ones by sampled subsets.
    """
    if n < 2:
        raise ExpanderError("an expander needs at least two vertices")
    eps = as_fraction(epsilon)
    d = min_degree(eps)
    alpha, beta = 2 * eps, 1 - 2 * eps
    full = math.comb(n, _subset_size(n, alpha)) <= budget
    if not _attainable(n, alpha, beta, closed):
        # not even the complete graph expands (e.g. n = 2), so no retry can help
        log.warning("n=%d: expansion unattainable, returning the unverified union", n)
        return ExpanderGraph(n, eps, d, _union(n, d, make_rng((int(seed), 0))), "unattainable", 0)
    if not full:
        log.info("n=%d: exhaustive expansion check skipped, sampling %d subsets", n, samples)
    for attempt in range(max_retries + 1):
        rng = make_rng((int(seed), attempt))
        adj = _union(n, d, rng)
        g = ExpanderGraph(n, eps, d, adj, "full" if full else "sampled", attempt)
        ok = (verify_expansion(g, alpha, beta, budget, closed) if full
              else sample_expansion(g, alpha, beta, samples, rng, closed))
        if ok:
            return g
    raise ExpanderError(f"no expander found for n={n}, epsilon={eps} after {max_retries} retries")


def from_edges(n: int, edges, epsilon=Fraction(1, 4), degree: int = 0) -> ExpanderGraph:
    adj = [set() for _ in range(n)]
    for a, b in edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return ExpanderGraph(n, as_fraction(epsilon), degree, tuple(frozenset(a) for a in adj))


def report(n: int, epsilon, seed, budget: int = DEFAULT_BUDGET, closed: bool = False) -> dict:
    g = build(n, epsilon, seed, budget=budget, closed=closed)
    return {
        "n": n,
        "epsilon": str(g.epsilon),
        "d": g.degree,
        "max_neighbors": g.max_degree(),
        "verified": g.verified,
        "retries": g.retries,
    }


__all__ = [
    "ExpanderGraph", "ExpanderError", "InstanceTooLarge", "build", "min_degree",
    "random_perfect_matching", "verify_expansion", "sample_expansion", "make_rng",
    "from_edges", "report",
]
