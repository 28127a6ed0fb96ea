"""Brute-force ground truth: every free tree of order n with max degree <= delta.

Trees are generated rooted at their centroid.  A unicentroidal tree is a
multiset of at most ``delta`` branches, each of order <= (n-1)//2; a
bicentroidal tree is an unordered pair of order-n/2 halves joined by the
central edge.  Branches are planted trees whose root keeps <= delta-1
children, so the degree bound is enforced while building, never by
filtering.

A rooted tree is encoded as "(" + sorted children's encodings + ")", the
AHU canonical string; the same encoding is used by :func:`canonicalize`
for arbitrary labelled input.  Strings rather than nested tuples keep
comparisons non-recursive on deep trees.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Iterator

import mpmath

from .census import Marking

ORDER_BOUND = 20


class ResourceLimitError(RuntimeError):
    """Requested order is beyond what exhaustive generation supports."""


@dataclass(frozen=True)
class CanonicalTree:
    """Canonical free tree.

    ``parents`` lists vertices in preorder of the canonical rooted form
    (root first, ``parents[0] == -1``).  ``center`` is ``"centroid"`` or
    ``"bicentroid"``; in the latter case vertex 0 and the first vertex of the
    second half are the two centroids.
    """

    n: int
    parents: tuple
    center: str

    def edges(self) -> list[tuple[int, int]]:
        return [(p, v) for v, p in enumerate(self.parents) if p >= 0]

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for p, v in self.edges():
            deg[p] += 1
            deg[v] += 1
        return deg


@lru_cache(maxsize=None)
def _planted(size: int, delta: int) -> tuple:
    """Canonical rooted trees of the given order, root <= delta-1 children, others too."""
    return tuple(sorted(
        _join(children) for children in _forests(size - 1, delta - 1, size - 1, delta)))


def _join(children) -> str:
    return "(" + "".join(sorted(children)) + ")"


def _forests(total: int, max_parts: int, max_size: int, delta: int,
             bound: tuple | None = None) -> Iterator[tuple]:
    # Multisets of planted trees with orders summing to ``total``, emitted as
    # tuples non-increasing in (order, index) so each multiset appears once.
    if total == 0:
        yield ()
        return
    if max_parts == 0:
        return
    for size in range(min(total, max_size), 0, -1):
        if size * max_parts < total:
            break
        trees = _planted(size, delta)
        for idx in range(len(trees) - 1, -1, -1):
            key = (size, idx)
            if bound is not None and key > bound:
                continue
            for rest in _forests(total - size, max_parts - 1, size, delta, key):
                yield (trees[idx],) + rest


def _preorder(tree: str, parent: int, out: list[int]) -> None:
    stack: list[int] = []
    for ch in tree:
        if ch == "(":
            out.append(stack[-1] if stack else parent)
            stack.append(len(out) - 1)
        else:
            stack.pop()


def _from_centroid(tree: str) -> CanonicalTree:
    parents: list[int] = []
    _preorder(tree, -1, parents)
    return CanonicalTree(len(parents), tuple(parents), "centroid")


def _from_bicentroid(a: str, b: str) -> CanonicalTree:
    big, small = max(a, b), min(a, b)
    parents: list[int] = []
    _preorder(big, -1, parents)
    _preorder(small, 0, parents)
    return CanonicalTree(len(parents), tuple(parents), "bicentroid")


def enumerate_trees(n: int, delta: int, bound: int = ORDER_BOUND) -> Iterator[CanonicalTree]:
    """Stream each free tree on n vertices with max degree <= delta exactly once."""
    if n < 1:
        raise ValueError("order must be >= 1")
    if n > bound:
        raise ResourceLimitError(f"order {n} exceeds the oracle bound {bound}")
    if delta < 1:
        raise ValueError("degree bound must be >= 1")
    if n == 1:
        yield CanonicalTree(1, (-1,), "centroid")
        return
    for branches in _forests(n - 1, delta, (n - 1) // 2, delta):
        yield _from_centroid(_join(branches))
    if n % 2 == 0:
        halves = _planted(n // 2, delta)
        for a, b in combinations_with_replacement(halves, 2):
            yield _from_bicentroid(a, b)


def count_trees(n: int, delta: int) -> int:
    return sum(1 for _ in enumerate_trees(n, delta))


# ---------------------------------------------------------------------------
# Canonicalization of arbitrary labelled trees
# ---------------------------------------------------------------------------


def _encode(adj: list[list[int]], root: int, block: int) -> str:
    # AHU form of the component of ``root`` after deleting vertex ``block``.
    # Iterative to dodge recursion limits on long paths.
    order, parent = [root], {root: block}
    for v in order:
        for w in adj[v]:
            if w != parent[v]:
                parent[w] = v
                order.append(w)
    enc: dict[int, str] = {}
    for v in reversed(order):
        enc[v] = _join(enc[w] for w in adj[v] if w != parent[v])
    return enc[root]


def _centroids(adj: list[list[int]]) -> list[int]:
    n = len(adj)
    order, parent = [0], [-1] * n
    seen = [False] * n
    seen[0] = True
    for v in order:
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                parent[w] = v
                order.append(w)
    if len(order) != n:
        raise ValueError("edge list is not connected")
    size = [1] * n
    for v in reversed(order[1:]):
        size[parent[v]] += size[v]
    best, out = n, []
    for v in range(n):
        heaviest = n - size[v]
        for w in adj[v]:
            if w != parent[v]:
                heaviest = max(heaviest, size[w])
        if heaviest < best:
            best, out = heaviest, [v]
        elif heaviest == best:
            out.append(v)
    return out


def canonicalize(n: int, edges) -> CanonicalTree:
    """Canonical form of the tree on vertices 0..n-1 with the given edges."""
    edges = list(edges)
    if len(edges) != n - 1:
        raise ValueError(f"a tree on {n} vertices has {n - 1} edges, got {len(edges)}")
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    if n == 1:
        return CanonicalTree(1, (-1,), "centroid")
    cents = _centroids(adj)
    if len(cents) == 1:
        return _from_centroid(_encode(adj, cents[0], -1))
    c1, c2 = cents
    return _from_bicentroid(_encode(adj, c1, c2), _encode(adj, c2, c1))


# ---------------------------------------------------------------------------
# Per-tree statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeStats:
    degree_hist: dict
    edge_hist: dict
    zagreb: dict
    randic: dict


def _as_mpf(x):
    if isinstance(x, str):
        return mpmath.mpf(mpmath.mpmathify(x))
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def general_zagreb(degrees, alpha, dps: int = 50):
    """D_alpha = sum of degree**alpha over vertices."""
    with mpmath.workdps(dps + 10):
        a = _as_mpf(alpha)
        total = mpmath.mpf(0)
        for d in degrees:
            if d == 0:
                if a <= 0:
                    raise ValueError("0**alpha is undefined for alpha <= 0 (single vertex)")
                continue
            total += mpmath.mpf(d) ** a
    return +total


def general_randic(degrees, edges, beta, dps: int = 50):
    """R_beta = sum over edges uv of (d_u d_v)**beta."""
    with mpmath.workdps(dps + 10):
        b = _as_mpf(beta)
        total = mpmath.mpf(0)
        for x, y in edges:
            total += mpmath.mpf(degrees[x] * degrees[y]) ** b
    return +total


def stats(tree: CanonicalTree, alphas=(), betas=(), dps: int = 50) -> TreeStats:
    deg = tree.degrees()
    edges = tree.edges()
    degree_hist = dict(sorted(Counter(deg).items()))
    edge_hist = dict(sorted(Counter(
        (min(deg[a], deg[b]), max(deg[a], deg[b])) for a, b in edges).items()))
    return TreeStats(
        degree_hist,
        edge_hist,
        {a: general_zagreb(deg, a, dps) for a in alphas},
        {b: general_randic(deg, edges, b, dps) for b in betas},
    )


def statistic(tree: CanonicalTree, marking: Marking) -> int:
    """Value of the marked statistic on one tree."""
    deg = tree.degrees()
    if marking.kind == "degree":
        return sum(1 for d in deg if d == marking.j)
    if marking.kind == "edge":
        want = (marking.i, marking.j)
        return sum(1 for a, b in tree.edges()
                   if (min(deg[a], deg[b]), max(deg[a], deg[b])) == want)
    return 0


def aggregate(n: int, delta: int, marking: Marking) -> dict:
    """Histogram k -> number of trees in T_n^delta whose statistic equals k."""
    hist: Counter = Counter()
    for tree in enumerate_trees(n, delta):
        hist[statistic(tree, marking)] += 1
    return dict(sorted(hist.items()))


def aggregate_all(n: int, delta: int, markings) -> dict:
    """One pass over T_n^delta, histograms for several markings at once."""
    hists = {m: Counter() for m in markings}
    for tree in enumerate_trees(n, delta):
        for m, h in hists.items():
            h[statistic(tree, m)] += 1
    return {m: dict(sorted(h.items())) for m, h in hists.items()}
