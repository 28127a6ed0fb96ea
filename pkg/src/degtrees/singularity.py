"""Dominant singularity x0 = f(1), its motion f(u), and the moment constants.

The marked functional system ``y = F(x, y, u)`` is evaluated numerically.
Only the s_1 slot of each cycle index is an unknown; the plethystic slots
s_r = g(x**r, u**r), r >= 2, are read off the exact census series, which
converge geometrically there because x**r is far inside the disk.

Derivatives F_y, F_x, F_u are exact: every quantity carries its gradient
(forward mode), and the cycle-index recurrence propagates it, which is the
same as differentiating Z(S_m) through its s_1-slot rule
dZ(S_m)/ds_1 = Z(S_{m-1}) plus the explicit x- and u-dependence of the
tails.

From the singular curve x = f(u):
    mu    = -f'(1) / f(1)
    sigma = mu**2 + mu - f''(1) / f(1)
with f', f'' by central differences plus one Richardson step.  The left
null vector of I - F_y gives an independent mu.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath

from .census import Marking, build_free, build_marked, check_delta
from .series import BivariateSeries, poly_eval

DEFAULT_PREC = 50
GUARD_DIGITS = 20


class ConvergenceError(RuntimeError):
    """Newton iteration failed; carries the last iterate and residual."""

    def __init__(self, message, iterate=None, residual=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


class SanityError(ValueError):
    """A solution landed outside its admissible region."""


class PrecisionError(RuntimeError):
    """Finite-difference error estimate exceeds tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConnectivityError(RuntimeError):
    """I - F_y does not have rank N-1 at the singular point."""


def _check_prec(prec: int) -> int:
    if prec < 30:
        raise ValueError("derivative computations need precision >= 30 digits")
    return int(prec)


# ---------------------------------------------------------------------------
# Forward-mode values
# ---------------------------------------------------------------------------


class Jet:
    """Value with its gradient over (x, y_1..y_N, u)."""

    __slots__ = ("v", "d")

    def __init__(self, v, d):
        self.v = v
        self.d = d

    @classmethod
    def const(cls, v, dim):
        return cls(mpmath.mpf(v), [mpmath.mpf(0)] * dim)

    @classmethod
    def var(cls, v, idx, dim):
        d = [mpmath.mpf(0)] * dim
        d[idx] = mpmath.mpf(1)
        return cls(mpmath.mpf(v), d)

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v + o.v, [a + b for a, b in zip(self.d, o.d)])
        return Jet(self.v + o, self.d)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v - o.v, [a - b for a, b in zip(self.d, o.d)])
        return Jet(self.v - o, self.d)

    def __rsub__(self, o):
        return Jet(o - self.v, [-a for a in self.d])

    def __mul__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v * o.v, [self.v * b + o.v * a for a, b in zip(self.d, o.d)])
        return Jet(self.v * o, [a * o for a in self.d])

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Jet.const(1, len(self.d))
        for _ in range(k):
            out = out * self
        return out


def cycle_index_values(s: list, max_m: int) -> list:
    """[Z(S_0), ..., Z(S_max_m)] at power sums s[1..max_m] (s[0] ignored)."""
    dim = len(s[1].d)
    z = [Jet.const(1, dim)]
    for m in range(1, max_m + 1):
        acc = s[1] * z[m - 1]
        for r in range(2, m + 1):
            acc = acc + s[r] * z[m - r]
        z.append(acc * (mpmath.mpf(1) / m))
    return z


# ---------------------------------------------------------------------------
# The implicit system
# ---------------------------------------------------------------------------


@dataclass
class SystemEval:
    F: list
    Fy: list
    Fx: list
    Fu: list


def _growth_estimate(delta: int) -> float:
    p = build_free(delta, 120).p
    return float(mpmath.mpf(p[119]) / p[120]) / (1 + 1.5 / 120)


def tail_order(delta: int, prec: int, u_radius: float) -> int:
    """Series order making the neglected tail of g(x^r, u^r) < 10^-(prec+5).

    Coefficients grow like x0^-n (times u^n for u > 1 since the u-degree is
    at most n), and x^r <= x^2 with x near f(u) ~ x0 (1 + mu |u-1|).
    """
    x0 = _growth_estimate(delta)
    ratio = x0 * 1.01 * (1 + u_radius) ** 2 * (1 + u_radius) ** delta
    if ratio >= 1:
        raise ValueError("u_radius too large for a convergent tail")
    return int(math.ceil((prec + 5) * math.log(10) / -math.log(ratio))) + 10


class ImplicitSystem:
    """Numeric y = F(x, y, u) for one (delta, marking).

    Unknowns: y = (p) for the unmarked and vertex-degree systems, and
    y = (a_2, ..., a_delta) for the edge system, with p = x + sum(y).
    Edge type (1,1) and marks beyond delta reduce to the unmarked system
    (the statistic has no asymptotic contribution).
    """

    def __init__(self, delta: int, marking: Marking | None = None, prec: int = DEFAULT_PREC,
                 u_radius: float = 0.05):
        self.delta = check_delta(delta)
        self.marking = marking or Marking()
        self.prec = _check_prec(prec)
        self.dps = self.prec + GUARD_DIGITS
        self.u_radius = u_radius
        m = self.marking
        degenerate = m.exceeds(delta) or (m.kind == "edge" and (m.i, m.j) == (1, 1))
        self.kind = "none" if (m.kind == "none" or degenerate) else m.kind
        self.order = tail_order(delta, self.prec, u_radius)
        if self.kind == "none":
            t = build_free(delta, self.order)
            self.series = {"p": BivariateSeries.from_univariate(t.p)}
        else:
            ms = build_marked(delta, m, self.order)
            self.series = {"p": ms.p}
            for k, a in ms.a.items():
                self.series[f"a{k}"] = a
        self.dim = delta - 1 if self.kind == "edge" else 1
        self._coef_cache: dict = {}
        self._base = None

    # -- tails -------------------------------------------------------------

    def _coeffs_at(self, name: str, r: int, u):
        key = (name, r, u)
        hit = self._coef_cache.get(key)
        if hit is None:
            s = self.series[name]
            U = u ** r
            vals = [poly_eval(c, U) for c in s.coeffs]
            dvals = [poly_eval([k * c for k, c in enumerate(poly)][1:], U) for poly in s.coeffs]
            hit = self._coef_cache[key] = (vals, dvals)
        return hit

    def _tail(self, name: str, r: int, x, u, nvar: int) -> Jet:
        vals, dvals = self._coeffs_at(name, r, u)
        X = x ** r
        val = sx = su = mpmath.mpf(0)
        for n in range(len(vals) - 1, 0, -1):
            val = val * X + vals[n]
            sx = sx * X + n * vals[n]
            su = su * X + dvals[n]
        val, su = val * X, su * X
        d = [mpmath.mpf(0)] * nvar
        d[0] = sx * r * x ** (r - 1)
        d[-1] = su * r * u ** (r - 1)
        return Jet(val, d)

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, x, y, u) -> SystemEval:
        """F, F_y, F_x, F_u at a numeric point."""
        with mpmath.workdps(self.dps):
            x, u = mpmath.mpf(x), mpmath.mpf(u)
            y = [mpmath.mpf(v) for v in y]
            nvar = self.dim + 2
            X = Jet.var(x, 0, nvar)
            Y = [Jet.var(v, k + 1, nvar) for k, v in enumerate(y)]
            U = Jet.var(u, nvar - 1, nvar)
            tail = lambda name, r: self._tail(name, r, x, u, nvar)  # noqa: E731
            if self.kind == "edge":
                F = self._edge_equations(X, Y, U, tail)
            else:
                F = self._degree_equation(X, Y[0], U, tail)
            return SystemEval(
                F=[f.v for f in F],
                Fy=[[f.d[c + 1] for c in range(self.dim)] for f in F],
                Fx=[f.d[0] for f in F],
                Fu=[f.d[-1] for f in F],
            )

    def _degree_equation(self, X, P, U, tail):
        delta = self.delta
        s = [None, P] + [tail("p", r) for r in range(2, delta + 1)]
        z = cycle_index_values(s, delta - 1)
        total = z[0]
        for l in range(1, delta):
            total = total + z[l]
        if self.kind == "degree":
            total = total + (U - 1) * z[self.marking.j - 1]
        return [X * total]

    def _edge_equations(self, X, Y, U, tail):
        delta, i, j = self.delta, self.marking.i, self.marking.j
        A = {1: X}
        for k in range(2, delta + 1):
            A[k] = Y[k - 2]
        P = X
        for v in Y:
            P = P + v
        rng = range(2, delta + 1)
        tp = {r: tail("p", r) for r in rng}

        def tails_of(k):
            return {r: tail(f"a{k}", r) for r in rng}

        def split(other: int, children: int):
            # sum_{c1+c2=children} Z(S_c1; p - a_other) Z(S_c2; a_other) u^c2
            ta = tails_of(other)
            rest = cycle_index_values([None, P - A[other]] + [tp[r] - ta[r] for r in rng],
                                      children)
            mark = cycle_index_values([None, A[other]] + [ta[r] for r in rng], children)
            acc = None
            for c2 in range(children + 1):
                term = rest[children - c2] * mark[c2] * (U ** c2)
                acc = term if acc is None else acc + term
            return acc

        zp = cycle_index_values([None, P] + [tp[r] for r in rng], delta - 1)
        out = []
        for k in range(2, delta + 1):
            if k == i:
                out.append(X * split(j, i - 1))
            elif k == j:
                out.append(X * split(i, j - 1))
            else:
                out.append(X * zp[k - 1])
        return out

    def characteristic(self, x, y, u):
        """det(I - F_y) at the point."""
        ev = self.evaluate(x, y, u)
        with mpmath.workdps(self.dps):
            return mpmath.det(mpmath.eye(self.dim) - mpmath.matrix(ev.Fy))

    # -- starting points -----------------------------------------------------

    def initial_guess(self):
        """(x, y) near the u=1 singular point, from census growth and partial sums."""
        with mpmath.workdps(self.dps):
            x = mpmath.mpf(_growth_estimate(self.delta))
            if self.kind == "edge":
                y = [poly_eval_series(self.series[f"a{k}"], x) for k in range(2, self.delta + 1)]
            else:
                y = [poly_eval_series(self.series["p"], x)]
        return x, y

    def base_solution(self) -> "ExtendedSolution":
        if self._base is None:
            if self.kind == "none":
                x, y = self.initial_guess()
            else:
                unmarked = _unmarked_solution(self.delta, self.prec)
                x = unmarked.x
                y = self._components_at(unmarked.x, unmarked.y[0])
            self._base = solve_extended(self, 1, warm=(x, y))
        return self._base

    def _components_at(self, x, p):
        if self.kind != "edge":
            return [p]
        # a_k = x Z(S_{k-1}; p) at u = 1
        with mpmath.workdps(self.dps):
            nvar = 2
            P = Jet.const(p, nvar)
            s = [None, P] + [self._tail("p", r, x, mpmath.mpf(1), nvar)
                             for r in range(2, self.delta + 1)]
            z = cycle_index_values(s, self.delta - 1)
            return [x * z[k - 1].v for k in range(2, self.delta + 1)]


def poly_eval_series(s: BivariateSeries, x, u=1):
    vals = [poly_eval(c, u) for c in s.coeffs]
    acc = mpmath.mpf(0)
    for c in reversed(vals):
        acc = acc * x + c
    return acc


@lru_cache(maxsize=None)
def _unmarked_system(delta: int, prec: int) -> ImplicitSystem:
    return ImplicitSystem(delta, Marking(), prec, u_radius=1e-3)


def _unmarked_solution(delta: int, prec: int) -> "ExtendedSolution":
    return _unmarked_system(delta, prec).base_solution()


# ---------------------------------------------------------------------------
# Newton on the extended system
# ---------------------------------------------------------------------------


@dataclass
class ExtendedSolution:
    u: object
    x: object
    y: list
    residual: object
    iterations: int
    steps: list = field(default_factory=list)


def _extended_residual(system: ImplicitSystem, z, u):
    x, y = z[0], z[1:]
    ev = system.evaluate(x, y, u)
    res = [y[k] - ev.F[k] for k in range(system.dim)]
    res.append(mpmath.det(mpmath.eye(system.dim) - mpmath.matrix(ev.Fy)))
    return res, ev


def solve_extended(system: ImplicitSystem, u, warm=None, max_iter: int = 100) -> ExtendedSolution:
    """Solve y = F(x,y,u), det(I - F_y) = 0 for (x, y) = (f(u), y(f(u), u))."""
    with mpmath.workdps(system.dps):
        u = mpmath.mpf(u)
        if abs(u - 1) > system.u_radius * (1 + 1e-12):
            raise ValueError(f"|u-1| = {float(abs(u - 1))} exceeds the system's "
                             f"u_radius {system.u_radius}")
        if warm is None:
            base = system.base_solution() if u != 1 else None
            warm = (base.x, base.y) if base is not None else system.initial_guess()
        z = [mpmath.mpf(warm[0])] + [mpmath.mpf(v) for v in warm[1]]
        tol = mpmath.mpf(10) ** (-system.prec + 5)
        eps = mpmath.mpf(10) ** (-(system.dps // 2))
        n = system.dim + 1
        res, ev = _extended_residual(system, z, u)
        norm = max(abs(v) for v in res)
        steps = []
        for it in range(1, max_iter + 1):
            if norm < tol:
                break
            J = mpmath.matrix(n, n)
            for k in range(system.dim):
                J[k, 0] = -ev.Fx[k]
                for c in range(system.dim):
                    J[k, c + 1] = (1 if k == c else 0) - ev.Fy[k][c]
            for c in range(n):
                zp, zm = list(z), list(z)
                zp[c] += eps
                zm[c] -= eps
                J[n - 1, c] = (system.characteristic(zp[0], zp[1:], u)
                               - system.characteristic(zm[0], zm[1:], u)) / (2 * eps)
            try:
                delta = mpmath.lu_solve(J, mpmath.matrix([-v for v in res]))
            except ZeroDivisionError:
                raise ConvergenceError("singular Newton Jacobian", z, norm) from None
            lam = mpmath.mpf(1)
            for _ in range(40):
                trial = [z[c] + lam * delta[c] for c in range(n)]
                t_res, t_ev = _extended_residual(system, trial, u)
                t_norm = max(abs(v) for v in t_res)
                if t_norm < norm or t_norm < tol:
                    break
                lam /= 2
            else:
                raise ConvergenceError("step halving failed to reduce the residual", z, norm)
            z, res, ev, norm = trial, t_res, t_ev, t_norm
            steps.append(lam * max(abs(delta[c]) for c in range(n)))
        else:
            raise ConvergenceError(f"no convergence in {max_iter} iterations", z, norm)
        if not 0 < z[0] <= 0.5:
            raise SanityError(f"singularity x = {z[0]} outside (0, 1/2]")
        return ExtendedSolution(u, z[0], z[1:], norm, len(steps), steps)


def find_x0(delta: int, prec: int = DEFAULT_PREC):
    """(x0, p(x0)) from p = x sum_{k<delta} Z(S_k;p), x sum_{k<delta-1} Z(S_k;p) = 1."""
    sol = _unmarked_solution(check_delta(delta), _check_prec(prec))
    return sol.x, sol.y[0]


def planted_residuals(delta: int, x, p, prec: int = DEFAULT_PREC):
    """The two defining residuals of (x0, p0), evaluated independently of Newton."""
    system = _unmarked_system(delta, prec)
    with mpmath.workdps(system.dps):
        ev = system.evaluate(x, [p], 1)
        return p - ev.F[0], ev.Fy[0][0] - 1


def eval_planted_point(delta: int, x, prec: int = DEFAULT_PREC, max_iter: int = 1000):
    """p(x) for 0 < x <= x0 by scalar Newton on p = F(x, p), started from 0.

    At x = x0 the root is double and convergence is only linear.
    """
    system = _unmarked_system(check_delta(delta), _check_prec(prec))
    with mpmath.workdps(system.dps):
        x = mpmath.mpf(x)
        if x <= 0:
            raise ValueError("x must be positive")
        tol = mpmath.mpf(10) ** (-system.prec + 5)
        p = mpmath.mpf(0)
        for _ in range(max_iter):
            ev = system.evaluate(x, [p], 1)
            g = p - ev.F[0]
            if abs(g) < tol:
                return p
            slope = 1 - ev.Fy[0][0]
            if slope <= 0:
                raise ConvergenceError("x lies beyond the singularity", p, abs(g))
            p = p - g / slope
        raise ConvergenceError(f"no convergence in {max_iter} iterations", p, abs(g))


# ---------------------------------------------------------------------------
# Moment constants
# ---------------------------------------------------------------------------


@dataclass
class AsymptoticConstants:
    delta: int
    marking: Marking
    x0: object
    f_prime_1: object
    f_double_prime_1: object
    mu: object
    sigma: object
    mu_nullvector: object = None
    null_vector: list | None = None
    tau_hat: object = None
    diagnostics: dict = field(default_factory=dict)


def mu_sigma(system: ImplicitSystem, prec: int | None = None, h=1e-6,
             tol_first=1e-10, tol_second=1e-8) -> AsymptoticConstants:
    """mu and sigma from f(u) sampled at 1, 1 +- h, 1 +- h/2."""
    prec = _check_prec(prec or system.prec)
    if prec > system.prec:
        raise ValueError("system was built at lower precision than requested")
    with mpmath.workdps(system.dps):
        h = mpmath.mpf(h)
        base = system.base_solution()
        f = {0: base.x}
        residuals = {"u=1": base.residual}
        for k, du in (("+h", h), ("-h", -h), ("+h/2", h / 2), ("-h/2", -h / 2)):
            sol = solve_extended(system, 1 + du, warm=(base.x, base.y))
            f[k] = sol.x
            residuals[f"u=1{k}"] = sol.residual
        d1_h = (f["+h"] - f["-h"]) / (2 * h)
        d1_h2 = (f["+h/2"] - f["-h/2"]) / h
        d2_h = (f["+h"] - 2 * f[0] + f["-h"]) / h ** 2
        d2_h2 = (f["+h/2"] - 2 * f[0] + f["-h/2"]) / (h / 2) ** 2
        f1 = (4 * d1_h2 - d1_h) / 3
        f2 = (4 * d2_h2 - d2_h) / 3
        err1, err2 = abs(f1 - d1_h2), abs(f2 - d2_h2)
        x0 = f[0]
        mu = -f1 / x0
        sigma = mu ** 2 + mu - f2 / x0
        diagnostics = {
            "residuals": residuals,
            "f1_error_estimate": err1,
            "f2_error_estimate": err2,
            "h": h,
            "tail_order": system.order,
            "newton_steps_u1": base.steps,
        }
        if err1 / x0 > tol_first or err2 / x0 > tol_second:
            raise PrecisionError(
                "finite-difference error estimate too large; raise precision or shrink h",
                diagnostics)
        return AsymptoticConstants(system.delta, system.marking, x0, f1, f2, mu, sigma,
                                   diagnostics=diagnostics)


def left_null_vector(matrix, dps: int):
    """Unit left null vector of a square matrix of rank n-1, via SVD."""
    with mpmath.workdps(dps):
        A = mpmath.matrix(matrix)
        n = A.rows
        if n == 1:
            return [mpmath.mpf(1)], [abs(A[0, 0])]
        U, S, V = mpmath.svd_r(A.T)
        sv = [S[k] for k in range(n)]
        k_min = min(range(n), key=lambda k: sv[k])
        others = [sv[k] for k in range(n) if k != k_min]
        if min(others) < mpmath.mpf(10) ** -10:
            raise ConnectivityError("I - F_y has rank below N-1")
        v = [V[k_min, c] for c in range(n)]
        return v, sorted(sv)


def mu_via_null_vector(system: ImplicitSystem, prec: int | None = None):
    """mu = v^T F_u / (x0 v^T F_x) with v^T (I - F_y) = 0 at u = 1.

    Returns (mu, v) with v scaled so its first entry is 1.
    """
    base = system.base_solution()
    with mpmath.workdps(system.dps):
        ev = system.evaluate(base.x, base.y, 1)
        M = mpmath.eye(system.dim) - mpmath.matrix(ev.Fy)
        v, sv = left_null_vector(M, system.dps)
        if sv[0] > mpmath.mpf(10) ** (-system.prec // 2):
            raise ConnectivityError("I - F_y is not singular at the computed point")
        v = [c / v[0] for c in v]
        num = sum(v[k] * ev.Fu[k] for k in range(system.dim))
        den = base.x * sum(v[k] * ev.Fx[k] for k in range(system.dim))
        return num / den, v


@lru_cache(maxsize=None)
def asymptotic_constants(delta: int, marking: Marking, prec: int = DEFAULT_PREC,
                         h: float = 1e-6) -> AsymptoticConstants:
    """Both mu routes plus sigma for one marking (cached)."""
    system = ImplicitSystem(delta, marking, prec, u_radius=max(2 * float(h), 1e-4))
    out = mu_sigma(system, prec, h)
    out.mu_nullvector, out.null_vector = mu_via_null_vector(system, prec)
    out.tau_hat = _tau_hat(delta, prec)
    return out


TAU_ORDER = 400


@lru_cache(maxsize=None)
def _tau_hat(delta: int, prec: int):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return estimate_tau(delta, TAU_ORDER, prec).tau_hat


# ---------------------------------------------------------------------------
# tau
# ---------------------------------------------------------------------------


@dataclass
class TauEstimate:
    tau_hat: object
    trace: list  # (n, s_n, extrapolant)
    diverging: bool


def richardson_limit(values: dict, n: int, k: int):
    """k-th order Richardson limit of a sequence with an expansion in 1/n."""
    total = mpmath.mpf(0)
    for i in range(k + 1):
        total += (values[n + i] * mpmath.mpf(n + i) ** k * (-1) ** (i + k)
                  / (math.factorial(i) * math.factorial(k - i)))
    return total


def estimate_tau(delta: int, order: int, prec: int = DEFAULT_PREC, k: int = 4,
                 start: int = 10) -> TauEstimate:
    """s_n = t_n x0^n n^(5/2) and its Richardson-extrapolated limit."""
    if order < 100:
        raise ValueError("tau estimation needs order >= 100")
    t = build_free(delta, order).t
    x0, _ = find_x0(delta, prec)
    with mpmath.workdps(prec + GUARD_DIGITS):
        s = {}
        power = mpmath.mpf(1)
        for n in range(1, order + 1):
            power *= x0
            s[n] = t[n] * power * mpmath.mpf(n) ** mpmath.mpf(2.5)
        trace = []
        for n in range(start, order + 1):
            ext = richardson_limit(s, n - k, k) if n - k >= start else None
            trace.append((n, s[n], ext))
        exts = [e for _, _, e in trace if e is not None]
        changes = [abs(exts[m + 1] / exts[m] - 1) for m in range(len(exts) - 1)]
        tail = changes[-5:]
        diverging = len(tail) >= 2 and all(tail[m + 1] > tail[m] for m in range(len(tail) - 1))
        if diverging:
            warnings.warn("tau trace: relative changes are increasing", RuntimeWarning,
                          stacklevel=2)
        return TauEstimate(exts[-1], trace, diverging)


def clear_caches() -> None:
    """Forget memoized systems, constants and tau estimates."""
    _unmarked_system.cache_clear()
    asymptotic_constants.cache_clear()
    _tau_hat.cache_clear()
