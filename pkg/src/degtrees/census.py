"""Exact counting series for degree-bounded planted, rooted and free trees.

All functional equations share the leading factor x, so coefficient n of
every unknown depends only on coefficients below n.  Each build is therefore
one bottom-up pass over the x-order using the online machinery from
:mod:`degtrees.series`.  With a mark, u-polynomials travel packed as single
integers (see :class:`~degtrees.series.PackedRing`).

Free trees come from rooted ones by Otter's dissimilarity identity
``t = r - (p**2 - p(x**2, u**2)) / 2`` plus, for edge marks, a correction for
the edge used to join the two planted halves.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .series import (
    BivariateSeries,
    OnlineCycleIndex,
    PackedRing,
    TruncatedSeries,
    online_product_coeff,
)


class EmptyFamilyError(ValueError):
    """No trees of the requested order."""


def check_delta(delta: int) -> int:
    if int(delta) != delta or delta < 3:
        raise ValueError(f"degree bound must be an integer >= 3, got {delta!r}")
    return int(delta)


@dataclass(frozen=True)
class Marking:
    """Which statistic u counts: nothing, vertices of degree j, or (i,j)-edges."""

    kind: str = "none"
    i: int = 0
    j: int = 0

    def __post_init__(self):
        if self.kind == "none":
            return
        if self.kind == "degree":
            if self.j < 1:
                raise ValueError("vertex degree mark needs j >= 1")
        elif self.kind == "edge":
            if not 1 <= self.i <= self.j:
                raise ValueError("edge mark needs 1 <= i <= j")
        else:
            raise ValueError(f"unknown marking kind {self.kind!r}")

    @classmethod
    def degree(cls, j: int) -> "Marking":
        return cls("degree", 0, j)

    @classmethod
    def edge(cls, i: int, j: int) -> "Marking":
        i, j = min(i, j), max(i, j)
        return cls("edge", i, j)

    @classmethod
    def parse(cls, text: str) -> "Marking":
        """Parse ``none``, ``degree:J`` or ``edge:I,J``."""
        text = text.strip()
        if text == "none":
            return cls()
        kind, _, rest = text.partition(":")
        try:
            if kind == "degree":
                return cls.degree(int(rest))
            if kind == "edge":
                a, b = rest.split(",")
                return cls.edge(int(a), int(b))
        except ValueError as exc:
            raise ValueError(f"bad marking {text!r}: {exc}") from None
        raise ValueError(f"bad marking {text!r}")

    def __str__(self) -> str:
        if self.kind == "degree":
            return f"degree:{self.j}"
        if self.kind == "edge":
            return f"edge:{self.i},{self.j}"
        return "none"

    def exceeds(self, delta: int) -> bool:
        """True when the statistic is identically zero on T_n^delta."""
        return self.j > delta


@dataclass(frozen=True)
class CensusTables:
    delta: int
    order: int
    p: TruncatedSeries
    p_restricted: TruncatedSeries
    r: TruncatedSeries
    t: TruncatedSeries

    def truncate(self, order: int) -> "CensusTables":
        cut = lambda s: TruncatedSeries(s.coeffs[: order + 1], order)  # noqa: E731
        return CensusTables(self.delta, order, cut(self.p), cut(self.p_restricted),
                            cut(self.r), cut(self.t))


@dataclass(frozen=True)
class MarkedSeries:
    """p(x,u), r(x,u), t(x,u) for one marking; ``a[k]`` only for edge marks."""

    delta: int
    marking: Marking
    order: int
    p: BivariateSeries
    r: BivariateSeries
    t: BivariateSeries
    a: dict = field(default_factory=dict)

    def truncate(self, order: int) -> "MarkedSeries":
        cut = lambda s: BivariateSeries(s.coeffs[: order + 1], order)  # noqa: E731
        return MarkedSeries(self.delta, self.marking, order, cut(self.p), cut(self.r),
                            cut(self.t), {k: cut(v) for k, v in self.a.items()})


# ---------------------------------------------------------------------------
# Online solvers
# ---------------------------------------------------------------------------


def _u_minus_one(ring: PackedRing, v):
    return ring.times_u_power(v, 1) - v


def _fill(h: OnlineCycleIndex, n: int) -> None:
    while len(h) < n:
        h.advance()


def _solve_degree_system(delta: int, order: int, j: int | None, ring: PackedRing):
    """p = x*sum_{l<delta} Z(S_l;p) + x(u-1)Z(S_{j-1};p); rooted analogue with l<=delta."""
    mark = j is not None and j <= delta
    p = [ring.wrap(0)]
    h = OnlineCycleIndex(p, delta, ring)
    for n in range(1, order + 1):
        _fill(h, n)
        total = sum(h.h[l][n - 1] for l in range(delta))
        if mark:
            total += _u_minus_one(ring, h.h[j - 1][n - 1])
        p.append(total)
    _fill(h, order)
    r = [ring.wrap(0)]
    restricted = [0]
    for n in range(1, order + 1):
        total = sum(h.h[l][n - 1] for l in range(delta + 1))
        if mark:
            total += _u_minus_one(ring, h.h[j][n - 1])
        r.append(total)
        if not ring.marked:
            restricted.append(sum(h.h[l][n - 1] for l in range(delta - 1)))
    return p, r, restricted


def _solve_edge_system(delta: int, order: int, i: int, j: int, ring: PackedRing):
    """Planted trees split by root degree, with (i,j)-edges marked.

    a_k = x*Z(S_{k-1}; p) for k not in {i, j};
    a_i = x*sum_{l1+l2=i-1} Z(S_l1; p-a_j) Z(S_l2; a_j) u^l2, symmetric for a_j;
    for i == j the single equation uses p-a_i and a_i.
    """
    zero = ring.wrap(0)
    a = {k: [zero] for k in range(1, delta + 1)}
    p = [zero]
    rest_j = [zero]
    hp = OnlineCycleIndex(p, delta, ring)
    h_rest_j = OnlineCycleIndex(rest_j, i, ring)
    h_aj = OnlineCycleIndex(a[j], i, ring)
    if i != j:
        rest_i = [zero]
        h_rest_i = OnlineCycleIndex(rest_i, j, ring)
        h_ai = OnlineCycleIndex(a[i], j, ring)
        indices = (hp, h_rest_j, h_aj, h_rest_i, h_ai)
    else:
        indices = (hp, h_rest_j, h_aj)

    def split_sum(h_rest, h_mark, total_children, n):
        # x^n coefficient of x * sum_{c1+c2=total} Z(S_c1; rest) Z(S_c2; marked) u^c2
        s = 0
        for c2 in range(total_children + 1):
            v = online_product_coeff(h_rest.h[total_children - c2], h_mark.h[c2], n - 1)
            if v:
                s += ring.times_u_power(v, c2)
        return s

    for n in range(1, order + 1):
        for h in indices:
            _fill(h, n)
        for k in range(1, delta + 1):
            if k == i:
                a[k].append(split_sum(h_rest_j, h_aj, i - 1, n))
            elif k == j:
                a[k].append(split_sum(h_rest_i, h_ai, j - 1, n))
            else:
                a[k].append(hp.h[k - 1][n - 1])
        pn = sum(a[k][n] for k in range(1, delta + 1))
        p.append(pn)
        rest_j.append(pn - a[j][n])
        if i != j:
            rest_i.append(pn - a[i][n])

    def marked_root(h_rest, h_mark, children, n):
        # root with `children` children; replaces u^0 weighting by u^c2
        s = 0
        for c2 in range(1, children + 1):
            v = online_product_coeff(h_rest.h[children - c2], h_mark.h[c2], n - 1)
            if v:
                s += ring.times_u_power(v, c2) - v
        return s

    for h in indices:
        _fill(h, order)
    r = [zero]
    for n in range(1, order + 1):
        total = sum(hp.h[l][n - 1] for l in range(delta + 1))
        total += marked_root(h_rest_j, h_aj, i, n)
        if i != j:
            total += marked_root(h_rest_i, h_ai, j, n)
        r.append(total)
    return a, p, r


# ---------------------------------------------------------------------------
# Builds
# ---------------------------------------------------------------------------

_lock = threading.Lock()
_cache: dict[tuple, object] = {}


def _cached(key: tuple, order: int, build):
    with _lock:
        hit = _cache.get(key)
    if hit is not None and hit.order >= order:
        return hit if hit.order == order else hit.truncate(order)
    value = build()
    with _lock:
        prev = _cache.get(key)
        if prev is None or prev.order < order:
            _cache[key] = value
    return value


def clear_cache() -> None:
    with _lock:
        _cache.clear()


def _free_from_rooted(r, p):
    # Otter: t = r - (p^2 - p(x^2))/2
    return r - (p * p - p.substitute_power(2)) * Fraction(1, 2)


def build_free(delta: int, order: int) -> CensusTables:
    """Exact p, p^(delta-1), r and t through x**order."""
    delta = check_delta(delta)
    if order < 1:
        raise ValueError("order must be >= 1")

    def build():
        ring = PackedRing(None)
        p, r, restricted = _solve_degree_system(delta, order, None, ring)
        p_s = TruncatedSeries(tuple(p), order)
        r_s = TruncatedSeries(tuple(r), order)
        t_s = _free_from_rooted(r_s, p_s)
        tables = CensusTables(delta, order, p_s, TruncatedSeries(tuple(restricted), order),
                              r_s, t_s)
        _assert_counts(tables.t, "t")
        return tables

    return _cached(("free", delta), order, build)


def build_planted(delta: int, order: int) -> tuple[TruncatedSeries, TruncatedSeries]:
    """(p, p_restricted): planted trees, and those whose root has degree <= delta-1."""
    tables = build_free(delta, order)
    return tables.p, tables.p_restricted


def _assert_counts(s, name: str) -> None:
    if not (s.is_integral() and s.is_nonnegative()):
        raise ArithmeticError(f"series {name} has a non-integral or negative coefficient")


def _slot_bytes_for(delta: int, order: int) -> int:
    """Slot width large enough for every intermediate u-coefficient.

    Every packed quantity is dominated coefficientwise (at u=1, up to a
    factor 8*delta^2 for the (u-1) and 1/m steps) by (1 + p)^(2 delta + 2).
    """
    p = build_free(delta, order).p
    base = TruncatedSeries.one(order) + p
    acc = TruncatedSeries.one(order)
    for _ in range(2 * delta + 2):
        acc = acc * base
    bound = 8 * delta * delta * max(acc.coeffs)
    return (bound.bit_length() + 1) // 8 + 1


def _unpack_series(ring: PackedRing, values: list, order: int) -> BivariateSeries:
    return BivariateSeries(tuple(ring.unpack(v, n) for n, v in enumerate(values)), order)


def _check_collapse(marked: MarkedSeries) -> None:
    free = build_free(marked.delta, marked.order)
    for name in ("p", "r", "t"):
        if getattr(marked, name).at_u(1) != getattr(free, name):
            raise ArithmeticError(f"u=1 specialization of {name} disagrees with the census")
    _assert_counts(marked.t, "t(x,u)")


def build_marked_degree(delta: int, j: int, order: int) -> MarkedSeries:
    """t(x,u) with u marking vertices of degree j (zero statistic for j > delta)."""
    delta = check_delta(delta)
    marking = Marking.degree(j)

    def build():
        ring = PackedRing(_slot_bytes_for(delta, order))
        p, r, _ = _solve_degree_system(delta, order, j, ring)
        p_s = _unpack_series(ring, p, order)
        r_s = _unpack_series(ring, r, order)
        out = MarkedSeries(delta, marking, order, p_s, r_s, _free_from_rooted(r_s, p_s))
        _check_collapse(out)
        return out

    return _cached(("degree", delta, j), order, build)


def build_marked_edge(delta: int, i: int, j: int, order: int) -> MarkedSeries:
    """Series with u marking edges whose end degrees are {i, j}.

    Returns ``a`` (planted trees by root degree, keys 1..delta) as well as
    p, r, t.  The type (1,1) occurs only in the two-vertex tree and is
    answered in closed form.
    """
    delta = check_delta(delta)
    marking = Marking.edge(i, j)
    i, j = marking.i, marking.j

    def build():
        if (i, j) == (1, 1) or j > delta:
            return _unmarked_edge_series(delta, marking, order)
        ring = PackedRing(_slot_bytes_for(delta, order))
        a, p, r = _solve_edge_system(delta, order, i, j, ring)
        a_s = {k: _unpack_series(ring, v, order) for k, v in a.items()}
        p_s = _unpack_series(ring, p, order)
        r_s = _unpack_series(ring, r, order)
        t_s = _free_from_rooted(r_s, p_s)
        one_minus_u = (1, -1)
        if i < j:
            t_s = t_s + (a_s[i] * a_s[j]).mul_u_poly(one_minus_u)
        else:
            ai = a_s[i]
            t_s = t_s + ((ai * ai - ai.substitute_power(2)) * Fraction(1, 2)).mul_u_poly(
                one_minus_u)
        out = MarkedSeries(delta, marking, order, p_s, r_s, t_s, a_s)
        _check_collapse(out)
        return out

    return _cached(("edge", delta, i, j), order, build)


def _unmarked_edge_series(delta: int, marking: Marking, order: int) -> MarkedSeries:
    ring = PackedRing(None)
    p = [0]
    h = OnlineCycleIndex(p, delta, ring)
    a = {k: [0] for k in range(1, delta + 1)}
    for n in range(1, order + 1):
        _fill(h, n)
        for k in range(1, delta + 1):
            a[k].append(h.h[k - 1][n - 1])
        p.append(sum(a[k][n] for k in a))
    free = build_free(delta, order)
    lift = BivariateSeries.from_univariate
    a_s = {k: lift(TruncatedSeries(tuple(v), order)) for k, v in a.items()}
    r_s, t_s = lift(free.r), lift(free.t)
    if (marking.i, marking.j) == (1, 1) and order >= 2:
        bump = BivariateSeries.monomial(2, 1, order) - BivariateSeries.monomial(2, 0, order)
        r_s, t_s = r_s + bump, t_s + bump
    return MarkedSeries(delta, marking, order, lift(free.p), r_s, t_s, a_s)


def build_marked(delta: int, marking: Marking, order: int) -> MarkedSeries:
    if marking.kind == "degree":
        return build_marked_degree(delta, marking.j, order)
    if marking.kind == "edge":
        return build_marked_edge(delta, marking.i, marking.j, order)
    raise ValueError("build_marked needs a degree or edge marking")


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistributionTable:
    """Exact law of X_n: counts[k] trees of order n have statistic k."""

    n: int
    counts: dict
    total: int
    mean: Fraction
    variance: Fraction
    third_central: Fraction

    def skewness(self, dps: int = 50):
        """Standardized third moment as an mpmath real (0 for a point mass)."""
        if self.variance == 0:
            return mpmath.mpf(0)
        with mpmath.workdps(dps):
            return (mpmath.mpf(self.third_central.numerator) / self.third_central.denominator
                    / (mpmath.mpf(self.variance.numerator) / self.variance.denominator)
                    ** mpmath.mpf(1.5))

    def probability(self, k: int) -> Fraction:
        return Fraction(self.counts.get(k, 0), self.total)


def table_from_counts(n: int, counts: dict) -> DistributionTable:
    counts = {int(k): int(c) for k, c in sorted(counts.items()) if c}
    total = sum(counts.values())
    if total == 0:
        raise EmptyFamilyError(f"no trees of order {n}")
    mean = Fraction(sum(k * c for k, c in counts.items()), total)
    var = sum((k - mean) ** 2 * c for k, c in counts.items()) / total
    third = sum((k - mean) ** 3 * c for k, c in counts.items()) / total
    return DistributionTable(n, counts, total, mean, Fraction(var), Fraction(third))


def distribution(t: BivariateSeries, n: int) -> DistributionTable:
    """Exact distribution of the marked statistic over trees of order n."""
    if not 0 <= n <= t.order:
        raise ValueError(f"order {n} outside the truncation 0..{t.order}")
    return table_from_counts(n, dict(enumerate(t.coeffs[n])))


def concentration_probe(table: DistributionTable) -> Fraction:
    """Exact Pr[|X_n - E X_n| > n^(3/4)]."""
    n3 = Fraction(table.n) ** 3
    tail = sum(c for k, c in table.counts.items() if (k - table.mean) ** 4 > n3)
    return Fraction(tail, table.total)


def exact_mean(t: BivariateSeries, n: int) -> Fraction:
    """E[X_n] from the u-derivative, without materializing the table."""
    poly = t.coeffs[n]
    total = sum(poly)
    if total == 0:
        raise EmptyFamilyError(f"no trees of order {n}")
    return Fraction(sum(k * c for k, c in enumerate(poly)), total)
