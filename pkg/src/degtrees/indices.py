"""General Zagreb and general Randic constants for almost all trees in T_n^delta.

    d_alpha = sum_{j=1..delta} j**alpha * mu_j
    r_beta  = sum_{i<=j<=delta} (i*j)**beta * mu_ij

and their finite-n counterparts E[D_alpha]/n, E[R_beta]/n obtained by
linearity of expectation from the exact census distributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath

from .census import Marking, build_marked, check_delta, exact_mean
from .singularity import DEFAULT_PREC, GUARD_DIGITS, asymptotic_constants


def _exponent(value):
    """Exact exponent when possible (int / Fraction), otherwise an mpf."""
    if isinstance(value, (int, Fraction)):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError:
            return mpmath.mpf(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12) if value != int(value) else int(value)
    return value


def _is_exact_power(e) -> bool:
    e = Fraction(e) if isinstance(e, (int, Fraction)) else None
    return e is not None and e.denominator == 1 and e >= 0


def _power(base: int, e):
    """base**e, exact for non-negative integer e, else an mpf."""
    if _is_exact_power(e):
        return base ** int(e)
    if isinstance(e, Fraction):
        e = mpmath.mpf(e.numerator) / e.denominator
    return mpmath.mpf(base) ** e


def vertex_markings(delta: int) -> list[Marking]:
    return [Marking.degree(j) for j in range(1, delta + 1)]


def edge_markings(delta: int) -> list[Marking]:
    return [Marking.edge(i, j) for j in range(1, delta + 1) for i in range(1, j + 1)]


@lru_cache(maxsize=None)
def mu_vector(delta: int, kind: str, prec: int = DEFAULT_PREC, h: float = 1e-6) -> dict:
    """{j: mu_j} (kind="vertex") or {(i, j): mu_ij} (kind="edge"), computed once."""
    delta = check_delta(delta)
    if kind == "vertex":
        return {m.j: asymptotic_constants(delta, m, prec, h).mu for m in vertex_markings(delta)}
    if kind == "edge":
        return {(m.i, m.j): asymptotic_constants(delta, m, prec, h).mu
                for m in edge_markings(delta)}
    raise ValueError(f"unknown kind {kind!r}")


@dataclass
class IndexReport:
    delta: int
    kind: str  # "zagreb" or "randic"
    exponent: object
    constant: object
    breakdown: dict
    finite_n: dict = field(default_factory=dict)  # n -> E[index]/n

    def gap(self, n: int):
        return abs(mpmath.mpf(_as_mpf(self.finite_n[n])) - self.constant)


def _as_mpf(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    return mpmath.mpf(v)


def zagreb_constant(delta: int, alpha, prec: int = DEFAULT_PREC, h: float = 1e-6,
                    orders=()) -> IndexReport:
    """d_alpha with its per-degree breakdown; E[D_alpha]/n for each n in ``orders``."""
    alpha = _exponent(alpha)
    mus = mu_vector(check_delta(delta), "vertex", prec, h)
    with mpmath.workdps(prec + GUARD_DIGITS):
        breakdown = {j: _as_mpf(_power(j, alpha)) * mu for j, mu in mus.items()}
        constant = mpmath.fsum(breakdown.values())
    finite = {n: exact_expected_index(delta, n, "zagreb", alpha, prec) / n for n in orders}
    return IndexReport(delta, "zagreb", alpha, constant, breakdown, finite)


def randic_constant(delta: int, beta, prec: int = DEFAULT_PREC, h: float = 1e-6,
                    orders=()) -> IndexReport:
    """r_beta with its per-edge-type breakdown; E[R_beta]/n for each n in ``orders``."""
    beta = _exponent(beta)
    mus = mu_vector(check_delta(delta), "edge", prec, h)
    with mpmath.workdps(prec + GUARD_DIGITS):
        breakdown = {ij: _as_mpf(_power(ij[0] * ij[1], beta)) * mu for ij, mu in mus.items()}
        constant = mpmath.fsum(breakdown.values())
    finite = {n: exact_expected_index(delta, n, "randic", beta, prec) / n for n in orders}
    return IndexReport(delta, "randic", beta, constant, breakdown, finite)


def exact_expected_index(delta: int, n: int, kind: str, exponent, prec: int = DEFAULT_PREC):
    """E[D_alpha] or E[R_beta] over T_n^delta.

    Exact ``Fraction`` when the exponent is a non-negative integer, otherwise
    an mpf with ``prec`` correct digits.
    """
    delta = check_delta(delta)
    e = _exponent(exponent)
    if n < 1:
        raise ValueError("order must be >= 1")
    if n == 1:
        # single vertex of degree 0, no edges
        if kind == "randic":
            return Fraction(0)
        if e == 0:
            return Fraction(1)
        if e > 0:
            return Fraction(0)
        raise ValueError("0**alpha undefined for alpha <= 0: D_alpha excluded at n = 1")
    if kind == "zagreb":
        terms = [(j, Marking.degree(j)) for j in range(1, delta + 1)]
    elif kind == "randic":
        terms = [(m.i * m.j, m) for m in edge_markings(delta)]
    else:
        raise ValueError(f"unknown index kind {kind!r}")
    means = [(w, exact_mean(build_marked(delta, m, n).t, n)) for w, m in terms]
    if _is_exact_power(e):
        return sum((Fraction(w) ** int(e) * mean for w, mean in means), Fraction(0))
    with mpmath.workdps(prec + GUARD_DIGITS):
        return mpmath.fsum(_power(w, e) * _as_mpf(mean) for w, mean in means)
