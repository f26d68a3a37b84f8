"""Truncated-Taylor (jet) evaluation of scalar fields and composite formulas.

A :class:`TaylorPoly` holds the Taylor coefficients of a smooth function at a
point, complete up to a requested total order, over an arbitrary number of
variables.  All arithmetic (+, -, *, /, integer powers) and the smooth
primitives (sqrt, exp, log, sin, cos, real powers) propagate the truncated
series exactly, so every mixed partial read off a result is exact up to
roundoff.  One mechanism serves all orders; Schwarz symmetry is automatic
because coefficients are stored per exponent multi-index.

Elementary functions are applied through classical series composition:
``g(f) = sum_k g_k (f - f0)^k`` where ``g_k`` are the Taylor coefficients of
the primitive at ``f0`` and ``(f - f0)`` has no constant term, so the sum
terminates at the truncation order.  Domain checks happen at order zero only.

:func:`finite_diff_oracle` is the independent cross-check used by the test
suite: central differences with one Richardson extrapolation step, driven by
plain float callbacks with no jet machinery behind them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .exprlang import Binary, Const, Expr, Power, Unary, Var, pretty


class JetDomainError(ArithmeticError):
    """A smooth primitive was evaluated outside its domain."""

    def __init__(self, primitive: str, value: float, where: str | None = None):
        self.primitive = primitive
        self.value = value
        self.where = where
        msg = f"{primitive} undefined at value {value!r}"
        if where:
            msg += f" in {where}"
        super().__init__(msg)


def _exponents(nvars: int, order: int):
    """All exponent tuples with total degree <= order, degree-major sorted."""
    out = []
    for deg in range(order + 1):
        out.extend(
            sorted(e for e in product(range(deg + 1), repeat=nvars) if sum(e) == deg)
        )
    return out


class JetContext:
    """Shared tables for one (nvars, order) truncation level."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        self.exponents = _exponents(nvars, order)
        self.index = {e: i for i, e in enumerate(self.exponents)}
        self.size = len(self.exponents)
        self.degree = np.array([sum(e) for e in self.exponents], dtype=np.int64)
        # count of monomials with degree <= d, for truncation by slicing
        self.offsets = [int(np.searchsorted(self.degree, d, side="right")) for d in range(order + 1)]
        self.factorial = np.array(
            [math.prod(math.factorial(k) for k in e) for e in self.exponents],
            dtype=np.float64,
        )
        ii, jj, kk = [], [], []
        for i, ei in enumerate(self.exponents):
            di = sum(ei)
            for j, ej in enumerate(self.exponents):
                if di + sum(ej) > order:
                    continue
                ii.append(i)
                jj.append(j)
                kk.append(self.index[tuple(a + b for a, b in zip(ei, ej))])
        self._mul_i = np.array(ii, dtype=np.int64)
        self._mul_j = np.array(jj, dtype=np.int64)
        self._mul_k = np.array(kk, dtype=np.int64)
        self._deriv_tables: dict[int, tuple] = {}

    def _deriv_table(self, v: int):
        # maps coefficients into the (nvars, order-1) context
        tab = self._deriv_tables.get(v)
        if tab is None:
            lower = get_context(self.nvars, self.order - 1)
            src, dst, fac = [], [], []
            for i, e in enumerate(lower.exponents):
                shifted = tuple(k + 1 if t == v else k for t, k in enumerate(e))
                src.append(self.index[shifted])
                dst.append(i)
                fac.append(e[v] + 1)
            tab = (
                lower,
                np.array(src, dtype=np.int64),
                np.array(dst, dtype=np.int64),
                np.array(fac, dtype=np.float64),
            )
            self._deriv_tables[v] = tab
        return tab

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.zeros(self.size)
        np.add.at(out, self._mul_k, a[self._mul_i] * b[self._mul_j])
        return out


@lru_cache(maxsize=None)
def get_context(nvars: int, order: int) -> JetContext:
    return JetContext(nvars, order)


class TaylorPoly:
    """Taylor coefficients of a function at a point, truncated by total order.

    ``coef[i]`` is the coefficient of the monomial ``ctx.exponents[i]`` in the
    local expansion, i.e. the mixed partial divided by the multi-factorial.
    """

    __slots__ = ("ctx", "coef")

    def __init__(self, ctx: JetContext, coef: np.ndarray):
        self.ctx = ctx
        self.coef = coef

    # -- constructors -------------------------------------------------------
    @staticmethod
    def constant(ctx: JetContext, value: float) -> "TaylorPoly":
        coef = np.zeros(ctx.size)
        coef[0] = float(value)
        return TaylorPoly(ctx, coef)

    @staticmethod
    def variable(ctx: JetContext, slot: int, value: float) -> "TaylorPoly":
        if not 0 <= slot < ctx.nvars:
            raise ValueError(f"variable slot {slot} out of range")
        coef = np.zeros(ctx.size)
        coef[0] = float(value)
        if ctx.order >= 1:
            e = tuple(1 if t == slot else 0 for t in range(ctx.nvars))
            coef[ctx.index[e]] = 1.0
        return TaylorPoly(ctx, coef)

    # -- basic accessors ----------------------------------------------------
    @property
    def value(self) -> float:
        return float(self.coef[0])

    @property
    def order(self) -> int:
        return self.ctx.order

    def truncated(self, order: int) -> "TaylorPoly":
        if order >= self.ctx.order:
            return self
        lower = get_context(self.ctx.nvars, order)
        return TaylorPoly(lower, self.coef[: lower.size].copy())

    def partial(self, alpha) -> float:
        """Mixed partial derivative for the exponent multi-index ``alpha``."""
        alpha = tuple(int(k) for k in alpha)
        if len(alpha) != self.ctx.nvars:
            raise ValueError("multi-index length does not match variable count")
        if sum(alpha) > self.ctx.order:
            raise ValueError(f"multi-index {alpha} exceeds truncation order {self.ctx.order}")
        i = self.ctx.index[alpha]
        return float(self.coef[i] * self.ctx.factorial[i])

    def deriv(self, v: int) -> "TaylorPoly":
        """Partial derivative as a jet of one lower order."""
        if self.ctx.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        lower, src, dst, fac = self.ctx._deriv_table(v)
        coef = np.zeros(lower.size)
        coef[dst] = self.coef[src] * fac
        return TaylorPoly(lower, coef)

    # -- arithmetic ---------------------------------------------------------
    def _match(self, other: "TaylorPoly"):
        if self.ctx is other.ctx:
            return self, other
        if self.ctx.nvars != other.ctx.nvars:
            raise ValueError("jet variable counts differ")
        k = min(self.ctx.order, other.ctx.order)
        return self.truncated(k), other.truncated(k)

    def __add__(self, other):
        if isinstance(other, TaylorPoly):
            a, b = self._match(other)
            return TaylorPoly(a.ctx, a.coef + b.coef)
        coef = self.coef.copy()
        coef[0] += other
        return TaylorPoly(self.ctx, coef)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, TaylorPoly):
            a, b = self._match(other)
            return TaylorPoly(a.ctx, a.coef - b.coef)
        coef = self.coef.copy()
        coef[0] -= other
        return TaylorPoly(self.ctx, coef)

    def __rsub__(self, other):
        coef = -self.coef
        coef[0] += other
        return TaylorPoly(self.ctx, coef)

    def __neg__(self):
        return TaylorPoly(self.ctx, -self.coef)

    def __mul__(self, other):
        if isinstance(other, TaylorPoly):
            a, b = self._match(other)
            return TaylorPoly(a.ctx, a.ctx.mul(a.coef, b.coef))
        return TaylorPoly(self.ctx, self.coef * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorPoly):
            return self * other.recip()
        return TaylorPoly(self.ctx, self.coef / float(other))

    def __rtruediv__(self, other):
        return self.recip() * float(other)

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("use powf for non-integer exponents")
        if n < 0:
            return self.recip() ** (-n)
        result = TaylorPoly.constant(self.ctx, 1.0)
        base = self
        k = int(n)
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # -- composition with univariate series ---------------------------------
    def compose(self, series: np.ndarray) -> "TaylorPoly":
        """Evaluate ``sum_k series[k] * (self - self.value)^k`` by Horner."""
        n = min(len(series), self.ctx.order + 1)
        u = TaylorPoly(self.ctx, self.coef.copy())
        u.coef[0] = 0.0
        result = TaylorPoly.constant(self.ctx, series[n - 1])
        for k in range(n - 2, -1, -1):
            result = result * u + float(series[k])
        return result

    def recip(self) -> "TaylorPoly":
        v = self.value
        if v == 0.0:
            raise JetDomainError("division", v)
        k = np.arange(self.ctx.order + 1)
        series = (-1.0) ** k / v ** (k + 1)
        return self.compose(series)

    def sqrt(self) -> "TaylorPoly":
        v = self.value
        if v <= 0.0:
            raise JetDomainError("sqrt", v)
        return self.compose(_pow_series(v, 0.5, self.ctx.order))

    def powf(self, p: float) -> "TaylorPoly":
        """Real power; integer exponents fall back to repeated products."""
        rounded = round(p)
        if abs(p - rounded) < 1e-12 and abs(rounded) <= 64:
            return self ** int(rounded)
        v = self.value
        if v <= 0.0:
            raise JetDomainError(f"power {p}", v)
        return self.compose(_pow_series(v, p, self.ctx.order))

    def exp(self) -> "TaylorPoly":
        v = math.exp(self.value)
        series = np.array([v / math.factorial(k) for k in range(self.ctx.order + 1)])
        return self.compose(series)

    def log(self) -> "TaylorPoly":
        v = self.value
        if v <= 0.0:
            raise JetDomainError("log", v)
        series = np.empty(self.ctx.order + 1)
        series[0] = math.log(v)
        for k in range(1, self.ctx.order + 1):
            series[k] = (-1.0) ** (k - 1) / (k * v**k)
        return self.compose(series)

    def sin(self) -> "TaylorPoly":
        v = self.value
        series = np.array(
            [math.sin(v + k * math.pi / 2) / math.factorial(k) for k in range(self.ctx.order + 1)]
        )
        return self.compose(series)

    def cos(self) -> "TaylorPoly":
        v = self.value
        series = np.array(
            [math.cos(v + k * math.pi / 2) / math.factorial(k) for k in range(self.ctx.order + 1)]
        )
        return self.compose(series)

    def __repr__(self):
        return f"TaylorPoly(nvars={self.ctx.nvars}, order={self.ctx.order}, value={self.value})"


def _pow_series(v: float, p: float, order: int) -> np.ndarray:
    """Taylor coefficients of u -> u^p at u = v."""
    series = np.empty(order + 1)
    series[0] = v**p
    c = 1.0
    for k in range(1, order + 1):
        c *= (p - k + 1) / k
        series[k] = c * v ** (p - k)
    return series


# ---------------------------------------------------------------------------
# expression evaluation
# ---------------------------------------------------------------------------


def eval_expr_poly(expr: Expr, ctx: JetContext, values, slots=None) -> TaylorPoly:
    """Evaluate an AST into a TaylorPoly.

    ``values[s]`` is the evaluation point of jet variable slot ``s``;
    ``slots[i-1]`` maps the expression's 1-based variable index ``i`` to its
    slot (identity when omitted).
    """
    if isinstance(expr, Const):
        return TaylorPoly.constant(ctx, expr.value)
    if isinstance(expr, Var):
        slot = expr.index - 1 if slots is None else slots[expr.index - 1]
        return TaylorPoly.variable(ctx, slot, values[slot])
    if isinstance(expr, Unary):
        arg = eval_expr_poly(expr.arg, ctx, values, slots)
        try:
            if expr.op == "neg":
                return -arg
            return getattr(arg, expr.op)()
        except JetDomainError as err:
            if err.where is None:
                raise JetDomainError(err.primitive, err.value, pretty(expr)) from None
            raise
    if isinstance(expr, Power):
        base = eval_expr_poly(expr.base, ctx, values, slots)
        try:
            return base**expr.exponent
        except JetDomainError as err:
            if err.where is None:
                raise JetDomainError(err.primitive, err.value, pretty(expr)) from None
            raise
    if isinstance(expr, Binary):
        left = eval_expr_poly(expr.left, ctx, values, slots)
        right = eval_expr_poly(expr.right, ctx, values, slots)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        try:
            return left / right
        except JetDomainError as err:
            if err.where is None:
                raise JetDomainError(err.primitive, err.value, pretty(expr)) from None
            raise
    raise TypeError(f"not an expression node: {expr!r}")


@dataclass
class Jet:
    """Value and complete mixed partials of a field at a point."""

    nvars: int
    order: int
    value: float
    partials: dict

    @staticmethod
    def from_poly(poly: TaylorPoly) -> "Jet":
        partials = {
            e: float(poly.coef[i] * poly.ctx.factorial[i])
            for i, e in enumerate(poly.ctx.exponents)
        }
        return Jet(poly.ctx.nvars, poly.ctx.order, poly.value, partials)

    def partial(self, alpha) -> float:
        alpha = tuple(int(k) for k in alpha)
        if len(alpha) != self.nvars:
            raise ValueError("multi-index length does not match variable count")
        if sum(alpha) > self.order:
            raise ValueError(f"multi-index {alpha} exceeds truncation order {self.order}")
        return self.partials[alpha]


def eval_jet(expr: Expr, x, order: int) -> Jet:
    """All mixed partials of ``expr`` at ``x`` up to total order ``order``."""
    ctx = get_context(len(x), order)
    return Jet.from_poly(eval_expr_poly(expr, ctx, [float(v) for v in x]))


# ---------------------------------------------------------------------------
# finite-difference oracle (tests only; independent of the jet engine)
# ---------------------------------------------------------------------------

_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}

_DEFAULT_H = {0: 1.0, 1: 1e-3, 2: 3e-3, 3: 6e-3, 4: 1e-2}


def finite_diff_oracle(f, x, multi_index, h: float | None = None) -> float:
    """Central-difference mixed partial with one Richardson step.

    ``f`` is a plain callable on points; ``multi_index`` is an exponent tuple
    (one entry per variable, total order at most 4).
    """
    multi_index = tuple(int(k) for k in multi_index)
    total = sum(multi_index)
    if total > 4:
        raise ValueError("finite_diff_oracle supports total order <= 4")
    if any(k > 4 for k in multi_index):
        raise ValueError("per-variable order exceeds stencil table")
    if h is None:
        h = _DEFAULT_H[total]
    x = np.asarray(x, dtype=float)

    def estimate(step: float) -> float:
        acc = 0.0
        axes = [list(_STENCILS[k].items()) for k in multi_index]
        for combo in product(*axes):
            offsets = np.array([c[0] for c in combo], dtype=float)
            weight = math.prod(c[1] for c in combo)
            acc += weight * f(x + step * offsets)
        return acc / step**total

    if total == 0:
        return float(f(x))
    d1 = estimate(h)
    d2 = estimate(h / 2)
    return (4.0 * d2 - d1) / 3.0
