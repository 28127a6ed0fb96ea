"""Exact truncated power series in x, optionally carrying a mark variable u.

Two carriers are provided:

* :class:`TruncatedSeries` -- coefficients are exact rationals (``int`` or
  :class:`fractions.Fraction`), indexed by the power of ``x``.
* :class:`BivariateSeries` -- the coefficient of ``x**n`` is a dense polynomial
  in ``u`` (tuple of exact rationals, lowest degree first) of degree <= n.

Products go through Kronecker substitution: integer coefficient vectors are
packed into one big integer, multiplied once, and unpacked.  Rational inputs
are scaled to integers by their common denominator first, so arithmetic stays
exact.

The module also hosts the *online* machinery used by the census solvers
(:class:`PackedRing`, :class:`OnlineCycleIndex`): there a u-polynomial is kept
permanently packed as a single integer so that the order-by-order fixed-point
solve is plain integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence, Union

try:
    import gmpy2

    _big = gmpy2.mpz
except ImportError:  # pragma: no cover - gmpy2 ships with the environment
    gmpy2 = None
    _big = int

Coeff = Union[int, Fraction]

# Below this many bits CPython's own multiplication is as fast as gmpy2.
_GMP_THRESHOLD_BITS = 4000


class OrderMismatchError(ValueError):
    """Binary operation on series truncated at different orders."""


class SeriesDomainError(ValueError):
    """Operation undefined for the given argument (r = 0, nonzero constant term...)."""


def _norm(c) -> Coeff:
    if isinstance(c, Fraction):
        return c.numerator if c.denominator == 1 else c
    if isinstance(c, int):
        return c
    # gmpy2.mpz and friends
    return int(c)


def _exact_div(total, m: int) -> Coeff:
    if isinstance(total, int):
        q, rem = divmod(total, m)
        return q if rem == 0 else Fraction(total, m)
    return _norm(Fraction(total) / m)


# ---------------------------------------------------------------------------
# Kronecker packing
# ---------------------------------------------------------------------------


def _slot_bytes(bound: int) -> int:
    """Bytes per slot so that every |value| <= bound fits in signed form."""
    return (int(bound).bit_length() + 1) // 8 + 1


def pack(values: Sequence[int], slot_bytes: int, stride: int = 1) -> int:
    """Return sum(values[i] * B**(stride*i)) with B = 256**slot_bytes.

    Values may be negative; they must satisfy |v| < B/2 for :func:`unpack`.
    """
    if not values:
        return 0
    zero = bytes(slot_bytes * stride)
    pad = bytes(slot_bytes * (stride - 1))
    pos, neg = [], []
    any_neg = False
    for v in values:
        v = int(v)
        if v >= 0:
            pos.append(v.to_bytes(slot_bytes, "little") + pad if v else zero)
            neg.append(zero)
        else:
            any_neg = True
            pos.append(zero)
            neg.append((-v).to_bytes(slot_bytes, "little") + pad)
    value = int.from_bytes(b"".join(pos), "little")
    if any_neg:
        value -= int.from_bytes(b"".join(neg), "little")
    return value


_OFFSETS: dict[tuple[int, int], int] = {}


def _offset(slot_bytes: int, count: int) -> int:
    key = (slot_bytes, count)
    off = _OFFSETS.get(key)
    if off is None:
        off = int.from_bytes((bytes(slot_bytes - 1) + b"\x80") * count, "little")
        _OFFSETS[key] = off
    return off


def unpack(value, slot_bytes: int, count: int) -> list[int]:
    """Inverse of :func:`pack` (stride 1) for ``count`` slots."""
    if count <= 0:
        if value:
            raise OverflowError("packed value does not fit in zero slots")
        return []
    half = 1 << (8 * slot_bytes - 1)
    v = int(value) + _offset(slot_bytes, count)
    if v < 0 or v >> (8 * slot_bytes * count):
        raise OverflowError("packed value exceeds its slot budget")
    data = v.to_bytes(slot_bytes * count, "little")
    return [
        int.from_bytes(data[i : i + slot_bytes], "little") - half
        for i in range(0, slot_bytes * count, slot_bytes)
    ]


def _bigmul(a: int, b: int):
    if a.bit_length() + b.bit_length() > _GMP_THRESHOLD_BITS and gmpy2 is not None:
        return int(_big(a) * _big(b))
    return a * b


def _int_convolve(a: Sequence[int], b: Sequence[int], size: int) -> list[int]:
    """First ``size`` coefficients of the product of two integer vectors."""
    a = list(a[:size])
    b = list(b[:size])
    while a and a[-1] == 0:
        a.pop()
    while b and b[-1] == 0:
        b.pop()
    if not a or not b:
        return [0] * size
    if len(a) == 1 or len(b) == 1:
        if len(b) == 1:
            a, b = b, a
        c = a[0]
        out = [c * v for v in b[:size]]
        return out + [0] * (size - len(out))
    bound = max(abs(v) for v in a) * max(abs(v) for v in b) * min(len(a), len(b))
    sb = _slot_bytes(bound)
    prod = _bigmul(pack(a, sb), pack(b, sb))
    count = min(size, len(a) + len(b) - 1)
    mask_bits = 8 * sb * count
    # Entries past ``count`` are dropped; the carry from a negative tail is
    # absorbed by reducing modulo B**count.
    low = prod & ((1 << mask_bits) - 1)
    if low >= 1 << (mask_bits - 1):
        low -= 1 << mask_bits
    out = unpack(low, sb, count) if count else []
    return out + [0] * (size - len(out))


def _rational_convolve(a: Sequence[Coeff], b: Sequence[Coeff], size: int) -> list[Coeff]:
    da = lcm(*(c.denominator for c in a if isinstance(c, Fraction))) if any(
        isinstance(c, Fraction) for c in a) else 1
    db = lcm(*(c.denominator for c in b if isinstance(c, Fraction))) if any(
        isinstance(c, Fraction) for c in b) else 1
    ia = [int(c * da) for c in a]
    ib = [int(c * db) for c in b]
    out = _int_convolve(ia, ib, size)
    if da == 1 and db == 1:
        return out
    d = da * db
    return [_norm(Fraction(c, d)) for c in out]


# ---------------------------------------------------------------------------
# Univariate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedSeries:
    """Power series in x known exactly through ``x**order``."""

    coeffs: tuple
    order: int

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("truncation order must be non-negative")
        if len(self.coeffs) != self.order + 1:
            raise ValueError(
                f"expected {self.order + 1} coefficients, got {len(self.coeffs)}")
        object.__setattr__(self, "coeffs", tuple(_norm(c) for c in self.coeffs))

    @classmethod
    def from_coeffs(cls, coeffs: Iterable[Coeff], order: int) -> "TruncatedSeries":
        c = list(coeffs)[: order + 1]
        c += [0] * (order + 1 - len(c))
        return cls(tuple(c), order)

    @classmethod
    def zero(cls, order: int) -> "TruncatedSeries":
        return cls((0,) * (order + 1), order)

    @classmethod
    def one(cls, order: int) -> "TruncatedSeries":
        return cls.from_coeffs([1], order)

    @classmethod
    def monomial(cls, n: int, order: int, coeff: Coeff = 1) -> "TruncatedSeries":
        c = [0] * (order + 1)
        if n <= order:
            c[n] = coeff
        return cls(tuple(c), order)

    def __getitem__(self, n: int) -> Coeff:
        return self.coeffs[n]

    def __len__(self) -> int:
        return len(self.coeffs)

    def _check(self, other: "TruncatedSeries") -> None:
        if not isinstance(other, TruncatedSeries):
            raise TypeError(f"cannot combine TruncatedSeries with {type(other).__name__}")
        if other.order != self.order:
            raise OrderMismatchError(
                f"truncation orders differ: {self.order} vs {other.order}")

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        return TruncatedSeries(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)),
                               self.order)

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        return TruncatedSeries(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)),
                               self.order)

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(tuple(-a for a in self.coeffs), self.order)

    def scale(self, c: Coeff) -> "TruncatedSeries":
        return TruncatedSeries(tuple(a * c for a in self.coeffs), self.order)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check(other)
        return TruncatedSeries(
            tuple(_rational_convolve(self.coeffs, other.coeffs, self.order + 1)),
            self.order)

    __rmul__ = __mul__

    def shift(self, k: int = 1) -> "TruncatedSeries":
        """Multiply by x**k, dropping what falls past the truncation order."""
        return TruncatedSeries.from_coeffs([0] * k + list(self.coeffs), self.order)

    def substitute_power(self, r: int) -> "TruncatedSeries":
        """f(x) -> f(x**r) at the same truncation order."""
        if r < 1:
            raise SeriesDomainError("substitute_power needs r >= 1")
        if r == 1:
            return self
        c = [0] * (self.order + 1)
        for n in range(self.order // r + 1):
            c[r * n] = self.coeffs[n]
        return TruncatedSeries(tuple(c), self.order)

    def is_integral(self) -> bool:
        return all(isinstance(c, int) for c in self.coeffs)

    def is_nonnegative(self) -> bool:
        return all(c >= 0 for c in self.coeffs)

    def evaluate(self, x):
        """Horner evaluation; ``x`` may be an mpmath number or a float."""
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


# ---------------------------------------------------------------------------
# Bivariate
# ---------------------------------------------------------------------------


def _trim(poly) -> tuple:
    p = [_norm(c) for c in poly]
    while p and p[-1] == 0:
        p.pop()
    return tuple(p)


def poly_eval(poly: Sequence, u):
    acc = 0
    for c in reversed(poly):
        acc = acc * u + c
    return acc


@dataclass(frozen=True)
class BivariateSeries:
    """Series in x whose coefficients are polynomials in the mark u.

    ``coeffs[n][k]`` is the coefficient of ``x**n * u**k``.  Trailing zero
    u-coefficients are stripped, so the zero polynomial is ``()``.
    """

    coeffs: tuple
    order: int

    def __post_init__(self):
        if len(self.coeffs) != self.order + 1:
            raise ValueError(
                f"expected {self.order + 1} coefficients, got {len(self.coeffs)}")
        polys = tuple(_trim(p) for p in self.coeffs)
        for n, p in enumerate(polys):
            if len(p) > n + 1:
                raise ValueError(f"u-degree {len(p) - 1} exceeds x-power {n}")
        object.__setattr__(self, "coeffs", polys)

    @classmethod
    def from_coeffs(cls, coeffs: Iterable[Sequence[Coeff]], order: int) -> "BivariateSeries":
        c = [tuple(p) for p in list(coeffs)[: order + 1]]
        c += [()] * (order + 1 - len(c))
        return cls(tuple(c), order)

    @classmethod
    def from_univariate(cls, f: TruncatedSeries) -> "BivariateSeries":
        return cls(tuple((c,) for c in f.coeffs), f.order)

    @classmethod
    def zero(cls, order: int) -> "BivariateSeries":
        return cls(((),) * (order + 1), order)

    @classmethod
    def one(cls, order: int) -> "BivariateSeries":
        return cls.from_coeffs([(1,)], order)

    @classmethod
    def monomial(cls, n: int, k: int, order: int, coeff: Coeff = 1) -> "BivariateSeries":
        c = [()] * (order + 1)
        if n <= order:
            c[n] = (0,) * k + (coeff,)
        return cls(tuple(c), order)

    def __getitem__(self, n: int) -> tuple:
        return self.coeffs[n]

    def _check(self, other: "BivariateSeries") -> None:
        if not isinstance(other, BivariateSeries):
            raise TypeError(f"cannot combine BivariateSeries with {type(other).__name__}")
        if other.order != self.order:
            raise OrderMismatchError(
                f"truncation orders differ: {self.order} vs {other.order}")

    def _zip(self, other: "BivariateSeries", sign: int) -> "BivariateSeries":
        self._check(other)
        out = []
        for a, b in zip(self.coeffs, other.coeffs):
            m = max(len(a), len(b))
            a = a + (0,) * (m - len(a))
            b = b + (0,) * (m - len(b))
            out.append(tuple(x + sign * y for x, y in zip(a, b)))
        return BivariateSeries(tuple(out), self.order)

    def __add__(self, other: "BivariateSeries") -> "BivariateSeries":
        return self._zip(other, 1)

    def __sub__(self, other: "BivariateSeries") -> "BivariateSeries":
        return self._zip(other, -1)

    def __neg__(self) -> "BivariateSeries":
        return BivariateSeries(tuple(tuple(-c for c in p) for p in self.coeffs), self.order)

    def scale(self, c: Coeff) -> "BivariateSeries":
        return BivariateSeries(tuple(tuple(a * c for a in p) for p in self.coeffs), self.order)

    def _flat(self) -> list:
        width = self.order + 1
        flat = [0] * (width * width)
        for n, p in enumerate(self.coeffs):
            flat[n * width : n * width + len(p)] = p
        return flat

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check(other)
        width = self.order + 1
        # Index n*(N+1)+k; u-degree <= x-power <= N keeps the slots disjoint.
        flat = _rational_convolve(self._flat(), other._flat(), width * width)
        return BivariateSeries(
            tuple(tuple(flat[n * width : n * width + n + 1]) for n in range(width)),
            self.order)

    __rmul__ = __mul__

    def substitute_power(self, r: int) -> "BivariateSeries":
        """f(x, u) -> f(x**r, u**r)."""
        if r < 1:
            raise SeriesDomainError("substitute_power needs r >= 1")
        if r == 1:
            return self
        c = [()] * (self.order + 1)
        for n in range(self.order // r + 1):
            p = self.coeffs[n]
            q = [0] * (r * (len(p) - 1) + 1) if p else []
            for k, v in enumerate(p):
                q[r * k] = v
            c[r * n] = tuple(q)
        return BivariateSeries(tuple(c), self.order)

    def mul_u_poly(self, poly: Sequence[Coeff], shift: int = 0) -> "BivariateSeries":
        """Multiply by ``x**shift * poly(u)``; poly degree must not exceed ``shift``."""
        poly = list(poly)
        out = [()] * (self.order + 1)
        for n in range(self.order + 1 - shift):
            p = self.coeffs[n]
            if not p:
                continue
            q = [0] * (len(p) + len(poly) - 1)
            for a, x in enumerate(p):
                for b, y in enumerate(poly):
                    q[a + b] += x * y
            out[n + shift] = tuple(q)
        return BivariateSeries(tuple(out), self.order)

    def at_u(self, u) -> TruncatedSeries | list:
        """Specialize the mark.  Exact ``u`` gives a TruncatedSeries."""
        vals = [poly_eval(p, u) for p in self.coeffs]
        if isinstance(u, (int, Fraction)):
            return TruncatedSeries(tuple(vals), self.order)
        return vals

    def du(self) -> "BivariateSeries":
        """Partial derivative in u."""
        return BivariateSeries(
            tuple(tuple(k * c for k, c in enumerate(p))[1:] for p in self.coeffs),
            self.order)

    def u_degree(self, n: int) -> int:
        return len(self.coeffs[n]) - 1

    def is_integral(self) -> bool:
        return all(isinstance(c, int) for p in self.coeffs for c in p)

    def is_nonnegative(self) -> bool:
        return all(c >= 0 for p in self.coeffs for c in p)


# ---------------------------------------------------------------------------
# Cycle index of the symmetric group
# ---------------------------------------------------------------------------


class CycleIndexEvaluator:
    """Memoized Z(S_k; f) for one argument series f.

    Uses h_m = (1/m) * sum_{r=1..m} f(x^r, u^r) * h_{m-r} with h_0 = 1, i.e.
    the multiset construction.  Each instance is single-owner; make one per
    task rather than sharing across threads.
    """

    def __init__(self, f: TruncatedSeries | BivariateSeries):
        lead = f.coeffs[0]
        if (lead if isinstance(f, TruncatedSeries) else any(lead)):
            raise SeriesDomainError("cycle-index substitution needs zero constant term")
        self.f = f
        self._h = [type(f).one(f.order)]
        self._powers: dict[int, TruncatedSeries | BivariateSeries] = {}

    def _power(self, r: int):
        s = self._powers.get(r)
        if s is None:
            s = self._powers[r] = self.f.substitute_power(r)
        return s

    def __call__(self, k: int):
        if k < 0:
            raise SeriesDomainError("cycle index order must be non-negative")
        while len(self._h) <= k:
            m = len(self._h)
            total = self._power(1) * self._h[m - 1]
            for r in range(2, m + 1):
                total = total + self._power(r) * self._h[m - r]
            self._h.append(_divide_series(total, m))
        return self._h[k]


def _divide_series(s, m: int):
    if isinstance(s, TruncatedSeries):
        return TruncatedSeries(tuple(_exact_div(c, m) for c in s.coeffs), s.order)
    return BivariateSeries(tuple(tuple(_exact_div(c, m) for c in p) for p in s.coeffs),
                           s.order)


def cycle_index_apply(f: TruncatedSeries | BivariateSeries, k: int):
    """Z(S_k; f): substitute f(x^i, u^i) for s_i in the cycle index of S_k."""
    return CycleIndexEvaluator(f)(k)


# ---------------------------------------------------------------------------
# Online (order-by-order) machinery on packed u-polynomials
# ---------------------------------------------------------------------------


class PackedRing:
    """Polynomials in u encoded as integers via u -> 256**slot_bytes.

    ``slot_bytes=None`` is the plain integer ring (no mark variable).  All
    arithmetic is integer arithmetic; only :meth:`plethysm` and
    :meth:`unpack` look inside the encoding.
    """

    def __init__(self, slot_bytes: int | None):
        self.slot_bytes = slot_bytes
        self.bits = 8 * slot_bytes if slot_bytes else 0

    @property
    def marked(self) -> bool:
        return self.slot_bytes is not None

    def wrap(self, v):
        return _big(v) if self.marked else v

    def u_power(self, k: int):
        if not self.marked:
            return 1
        return _big(1) << (self.bits * k)

    def times_u_power(self, v, k: int):
        return v << (self.bits * k) if self.marked else v

    def plethysm(self, v, r: int, degree: int):
        """u -> u**r applied to a packed polynomial of u-degree <= degree."""
        if r == 1 or not self.marked or not v:
            return v
        vals = unpack(v, self.slot_bytes, degree + 1)
        return _big(pack(vals, self.slot_bytes, stride=r))

    def unpack(self, v, degree: int) -> tuple:
        if not self.marked:
            return (int(v),)
        return _trim(unpack(v, self.slot_bytes, degree + 1))


class OnlineCycleIndex:
    """Coefficients of Z(S_m; f) for m <= max_m, grown one x-order at a time.

    ``arg`` is a list that the caller extends; coefficient k of every h_m can
    be produced once ``arg[1..k]`` is known.  ``degree_of(q)`` bounds the
    u-degree of ``arg[q]`` (needed to unpack for the u -> u^r rule).
    """

    def __init__(self, arg: list, max_m: int, ring: PackedRing):
        self.arg = arg
        self.max_m = max_m
        self.ring = ring
        one, zero = ring.wrap(1), ring.wrap(0)
        self.h = [[one]] + [[zero] for _ in range(max_m)]
        self._pleth: dict[tuple[int, int], object] = {}

    def _term(self, r: int, q: int):
        key = (r, q)
        v = self._pleth.get(key)
        if v is None:
            v = self._pleth[key] = self.ring.plethysm(self.arg[q], r, q)
        return v

    def __len__(self) -> int:
        return len(self.h[0])

    def advance(self) -> None:
        k = len(self.h[0])
        self.h[0].append(self.ring.wrap(0))
        for m in range(1, self.max_m + 1):
            total = 0
            for r in range(1, m + 1):
                hm = self.h[m - r]
                for q in range(1, k // r + 1):
                    c = hm[k - r * q]
                    if c:
                        total += self._term(r, q) * c
            q, rem = divmod(total, m)
            if rem:
                raise ArithmeticError("non-integral cycle-index coefficient")
            self.h[m].append(q)


def online_product_coeff(a: list, b: list, n: int):
    """Coefficient n of the product of two online series (lists)."""
    total = 0
    for q in range(n + 1):
        x = a[q]
        if x:
            y = b[n - q]
            if y:
                total += x * y
    return total
