"""Catalog of phi functions for two-dimensional (alpha,beta)-metrics.

Every family is evaluated through its univariate Taylor series at the
requested base point, which serves three consumers at once:

* scalar derivative data (:func:`phi_eval`, with the Q / Theta / Psi / Delta
  machinery assembled from them),
* jet composition inside the spray engine (:func:`phi_polys`),
* residual checks of the defining ODE identities
  (:func:`phi_identity_residual`).

Closed-form families build the series directly in jet arithmetic.  The
integral family ``thm41_v`` gets its base value from adaptive quadrature and
the remaining coefficients from the first-order ODE

    (b^2 - s^2) phi' = Phi(s) - s phi,   Phi(s) = m b^2 (s / sqrt(1-k s^2))^(m-1),

whose right-hand side closes the Taylor recurrence order by order.  This
avoids differentiating under the integral sign numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = (
    "kropina_linear",
    "thm41_ii",
    "thm41_iii",
    "thm41_iv",
    "thm41_iv_constb",
    "thm41_v",
    "m_kropina",
    "riemannian",
    "expr",
)

# tags accepted in metric-definition files ("expr" is programmatic only)
PHI_FILE_FAMILIES = tuple(f for f in FAMILIES if f != "expr")


class PhiDomainError(ValueError):
    """Parameter or evaluation-domain violation for a phi family."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class PhiSpec:
    """A phi family tag plus its parameters (subset per family)."""

    family: str
    c: float | None = None
    m: float | None = None
    k: float | None = None
    k1: float | None = None
    k2: float | None = None
    b: float | None = None
    expr: object = None  # AST for the raw-expression control family


@dataclass(frozen=True)
class PhiEval:
    """phi and derivatives at one ratio s, with the spray scalars."""

    s: float
    b2: float
    phi: float
    dphi: float
    d2phi: float
    d3phi: float
    Q: float
    Qp: float
    Theta: float
    Psi: float
    Delta: float


def _need(spec: PhiSpec, *names: str):
    missing = [n for n in names if getattr(spec, n) is None]
    if missing:
        raise PhiDomainError(
            f"family {spec.family!r} needs parameters {', '.join(missing)}"
        )


def _check_m(m: float):
    if abs(m) < 1e-12 or abs(m - 1.0) < 1e-12:
        raise PhiDomainError(f"m must differ from 0 and 1, got {m}")


def validate_phi_params(spec: PhiSpec):
    """Range-check the parameters of a PhiSpec, raising PhiDomainError."""
    if spec.family not in FAMILIES:
        raise PhiDomainError(f"unknown phi family {spec.family!r}")
    if spec.family == "kropina_linear":
        pass  # c defaults to 0
    elif spec.family == "thm41_ii":
        _need(spec, "k1", "k2")
    elif spec.family == "thm41_iii":
        _need(spec, "k1", "k2", "m")
        _check_m(spec.m)
    elif spec.family == "thm41_iv":
        _need(spec, "m", "k")
        _check_m(spec.m)
    elif spec.family == "thm41_iv_constb":
        _need(spec, "m", "b")
        _check_m(spec.m)
        if spec.b <= 0:
            raise PhiDomainError("b must be positive")
    elif spec.family == "thm41_v":
        _need(spec, "m", "k", "b")
        _check_m(spec.m)
        if spec.b <= 0:
            raise PhiDomainError("b must be positive")
        if spec.m <= 0:
            # the integrand carries t^(m-1) at the lower limit; only m > 0 is integrable
            raise PhiDomainError("thm41_v requires m > 0")
    elif spec.family == "m_kropina":
        _need(spec, "m")
        _check_m(spec.m)
    elif spec.family == "expr":
        if spec.expr is None:
            raise PhiDomainError("expr family needs an expression payload")
    return spec


def family_m(spec: PhiSpec) -> float | None:
    """The exponent m of the family, where defined."""
    if spec.family == "kropina_linear":
        return -1.0
    if spec.family == "thm41_ii":
        return -3.0
    if spec.family in ("thm41_iii", "thm41_iv", "thm41_iv_constb", "thm41_v", "m_kropina"):
        return spec.m
    return None


def linear_coefficient(spec: PhiSpec) -> float:
    """Coefficient of the linear-in-s part of phi."""
    if spec.family == "kropina_linear":
        return spec.c or 0.0
    if spec.family in ("thm41_ii", "thm41_iii"):
        return spec.k1
    return 0.0


def _is_int(x: float) -> bool:
    return abs(x - round(x)) < 1e-12


def _check_series_domain(spec: PhiSpec, s: float):
    fam = spec.family
    if fam in ("kropina_linear", "thm41_ii") and s == 0.0:
        raise PhiDomainError(f"{fam}: phi is singular at s=0")
    if fam in ("thm41_iii", "thm41_iv", "thm41_iv_constb", "thm41_v", "m_kropina"):
        m = spec.m
        if s == 0.0 and (m < 0 or not _is_int(m)):
            raise PhiDomainError(f"{fam}: s=0 outside the smooth domain for m={m}")
        if s < 0 and not _is_int(m):
            raise PhiDomainError(f"{fam}: s<0 needs integer m, got m={m}")
    if fam == "thm41_iii" and 1.0 + spec.k2 * s * s <= 0.0:
        raise PhiDomainError(f"thm41_iii: 1+k2*s^2 must be positive at s={s}")
    if fam == "thm41_iv" and 1.0 + spec.k * s * s <= 0.0:
        raise PhiDomainError(f"thm41_iv: 1+k*s^2 must be positive at s={s}")
    if fam == "thm41_iv_constb" and abs(s) >= spec.b:
        raise PhiDomainError(f"thm41_iv_constb: need |s| < b, got s={s}, b={spec.b}")
    if fam == "thm41_v":
        if abs(s) >= spec.b:
            raise PhiDomainError(f"thm41_v: need |s| < b, got s={s}, b={spec.b}")
        if spec.k > 0 and spec.k * s * s >= 1.0:
            raise PhiDomainError(f"thm41_v: need 1-k*t^2 > 0 on [0,s], got s={s}")
        if s == 0.0:
            raise PhiDomainError("thm41_v: series evaluation needs s != 0")


def phi_series(spec: PhiSpec, s: float, order: int) -> np.ndarray:
    """Taylor coefficients of phi at s, indices 0..order."""
    from .jets import TaylorPoly, get_context

    validate_phi_params(spec)
    _check_series_domain(spec, s)
    ctx = get_context(1, order)
    t = TaylorPoly.variable(ctx, 0, s)
    fam = spec.family

    if fam == "riemannian":
        return TaylorPoly.constant(ctx, 1.0).coef.copy()
    if fam == "kropina_linear":
        c = spec.c or 0.0
        return (c * t + t ** (-1)).coef.copy()
    if fam == "thm41_ii":
        return (spec.k1 * t + 2.0 * spec.k2 * t ** (-1) + t ** (-3)).coef.copy()
    if fam == "thm41_iii":
        body = t.powf(spec.m) * (1.0 + spec.k2 * t * t).powf((1.0 - spec.m) / 2.0)
        return (spec.k1 * t + body).coef.copy()
    if fam == "thm41_iv":
        return (t.powf(spec.m) * (1.0 + spec.k * t * t).powf((1.0 - spec.m) / 2.0)).coef.copy()
    if fam == "thm41_iv_constb":
        u = t * (1.0 / spec.b)
        return (t.powf(spec.m) * (1.0 - u * u).powf((1.0 - spec.m) / 2.0)).coef.copy()
    if fam == "m_kropina":
        return t.powf(spec.m).coef.copy()
    if fam == "expr":
        from .jets import eval_expr_poly

        return eval_expr_poly(spec.expr, ctx, [s]).coef.copy()
    if fam == "thm41_v":
        return _series_thm41_v(spec, s, order)
    raise PhiDomainError(f"unknown phi family {fam!r}")


def quadrature_thm41_v(m: float, k: float, b: float, s: float) -> float:
    """phi(s) for the integral family, by adaptive quadrature.

    The integrand carries the algebraic endpoint factor t^(m-1), which the
    QAWS weight handles exactly; tolerance 1e-12 absolute.
    """
    from scipy.integrate import quad

    if abs(s) >= b:
        raise PhiDomainError(f"thm41_v: need |s| < b, got s={s}")
    if s == 0.0:
        return 0.0
    if s < 0.0:
        if not _is_int(m):
            raise PhiDomainError(f"thm41_v: s<0 needs integer m, got m={m}")
        return (-1.0) ** int(round(m)) * quadrature_thm41_v(m, k, b, -s)
    if k > 0 and k * s * s >= 1.0:
        raise PhiDomainError(f"thm41_v: need 1-k*t^2 > 0 on [0,s]")

    def smooth_part(t):
        return (b * b - t * t) ** -1.5 * (1.0 - k * t * t) ** (-(m - 1.0) / 2.0)

    val, err = quad(
        smooth_part,
        0.0,
        s,
        weight="alg",
        wvar=(m - 1.0, 0.0),
        epsabs=1e-13,
        epsrel=1e-13,
        limit=500,
    )
    if not math.isfinite(val) or err > 1e-9:
        raise QuadratureError(f"quadrature error estimate {err} at s={s}")
    return m * b * b * math.sqrt(b * b - s * s) * val


def _series_thm41_v(spec: PhiSpec, s: float, order: int) -> np.ndarray:
    from .jets import TaylorPoly, get_context

    m, k, b = spec.m, spec.k, spec.b
    coeffs = np.zeros(order + 1)
    coeffs[0] = quadrature_thm41_v(m, k, b, s)
    if order == 0:
        return coeffs
    ctx = get_context(1, order)
    t = TaylorPoly.variable(ctx, 0, s)
    cap = (
        m
        * b
        * b
        * t.powf(m - 1.0)
        * (1.0 - k * t * t).powf((1.0 - m) / 2.0)
    )
    inv_denom = (b * b - t * t).recip()
    for j in range(order):
        phi_poly = TaylorPoly(ctx, coeffs.copy())
        rhs = (cap - t * phi_poly) * inv_denom
        coeffs[j + 1] = rhs.coef[j] / (j + 1)
    return coeffs


def phi_integral_j4(m: float, k: float, b: float, s: float):
    """Value and first three derivatives of the integral-family phi."""
    spec = PhiSpec(family="thm41_v", m=m, k=k, b=b)
    validate_phi_params(spec)
    series = phi_series(spec, s, 3)
    return (
        series[0],
        series[1],
        2.0 * series[2],
        6.0 * series[3],
    )


def _derivatives(spec: PhiSpec, s: float, n: int) -> np.ndarray:
    series = phi_series(spec, s, n)
    return np.array([series[d] * math.factorial(d) for d in range(n + 1)])


def phi_eval(spec: PhiSpec, s: float, b2: float) -> PhiEval:
    """phi, its derivatives, and the Q / Theta / Psi / Delta scalars."""
    d = _derivatives(spec, s, 3)
    phi, dphi, d2phi, d3phi = d
    denom = phi - s * dphi
    scale = max(abs(phi), abs(s * dphi), 1e-300)
    if abs(denom) <= 1e-12 * scale:
        raise PhiDomainError(
            f"phi - s*phi' vanishes at s={s} (Randers-degenerate direction)"
        )
    Q = dphi / denom
    Qp = phi * d2phi / denom**2
    Delta = 1.0 + s * Q + (b2 - s * s) * Qp
    if Delta == 0.0:
        raise PhiDomainError(f"Delta vanishes at s={s}, b2={b2}")
    Theta = (Q - s * Qp) / (2.0 * Delta)
    Psi = Qp / (2.0 * Delta)
    return PhiEval(
        s=s, b2=b2, phi=phi, dphi=dphi, d2phi=d2phi, d3phi=d3phi,
        Q=Q, Qp=Qp, Theta=Theta, Psi=Psi, Delta=Delta,
    )


def phi_polys(spec: PhiSpec, s_poly, nder: int = 2):
    """Jets of phi and its first ``nder`` derivatives, composed onto a jet of s."""
    order = s_poly.order
    series = phi_series(spec, s_poly.value, order + nder)
    out = []
    for d in range(nder + 1):
        shifted = np.array(
            [
                series[i + d] * math.factorial(i + d) / math.factorial(i)
                for i in range(order + 1)
            ]
        )
        out.append(s_poly.compose(shifted))
    return out


# ---------------------------------------------------------------------------
# identity residuals
# ---------------------------------------------------------------------------

IDENTITIES = ("kropina_ode", "y61", "y60", "y75", "w69", "y56")

# identity ids satisfied by each family (used by tests and the CLI)
MATCHING_IDENTITIES = {
    "kropina_linear": ("kropina_ode",),
    "thm41_ii": ("y60", "y75", "y56"),
    "thm41_iii": ("y61", "y60", "y56"),
    "thm41_iv": ("y60", "y75", "y56"),
    "thm41_iv_constb": ("y60", "y75", "y56"),
    "thm41_v": ("w69",),
}


def _series_coefficient_shift(spec: PhiSpec) -> float:
    """The s^2 Taylor coefficient of the series factor of phi (a_{m+2})."""
    if spec.family == "thm41_ii":
        return 2.0 * spec.k2
    if spec.family == "thm41_iii":
        return (1.0 - spec.m) * spec.k2 / 2.0
    if spec.family == "thm41_iv":
        return (1.0 - spec.m) * spec.k / 2.0
    if spec.family == "thm41_iv_constb":
        return (spec.m - 1.0) / (2.0 * spec.b**2)
    raise PhiDomainError(f"no series coefficient rule for family {spec.family!r}")


def _rational_q_params(spec: PhiSpec) -> tuple[float, float, float]:
    """(m, c1, c2) entering the rational form of Q for the power families."""
    if spec.family == "thm41_ii":
        c1 = 4.0 * spec.k2
        c2 = -48.0 * spec.k1 - c1 * c1
        return -3.0, c1, c2
    if spec.family == "thm41_iv":
        c1 = (1.0 - spec.m) * spec.k
        return spec.m, c1, 2.0 * (spec.m + 1.0) * c1 * c1
    if spec.family == "thm41_iv_constb":
        k = -1.0 / spec.b**2
        c1 = (1.0 - spec.m) * k
        return spec.m, c1, 2.0 * (spec.m + 1.0) * c1 * c1
    raise PhiDomainError(f"no rational-Q rule for family {spec.family!r}")


def phi_identity_residual(spec: PhiSpec, identity_id: str, s: float, b2: float) -> float:
    """Absolute residual |LHS - RHS| of a characterizing identity at s."""
    d = _derivatives(spec, s, 2)
    phi, dphi, d2phi = d

    if identity_id == "kropina_ode":
        return abs(s * s * d2phi + s * dphi - phi)

    if identity_id == "y61":
        if spec.family != "thm41_iii":
            # allow evaluation as a negative control with the family's own k2/m
            pass
        m = family_m(spec)
        k2 = spec.k2 if spec.k2 is not None else 0.0
        rhs = (-m + k2 * s * s) / ((1.0 + k2 * s * s) * s * s) * (phi - s * dphi)
        return abs(d2phi - rhs)

    if identity_id == "y60":
        m = family_m(spec)
        a_m2 = _series_coefficient_shift(spec)
        lhs = d2phi / (phi - s * dphi + (b2 - s * s) * d2phi)
        rhs = (m * (m - 1.0) + 2.0 * a_m2 * s * s) / (
            m * (m - 1.0) * b2 + (1.0 - m * m + 2.0 * a_m2 * b2) * s * s
        )
        return abs(lhs - rhs)

    if identity_id == "y75":
        m, c1, c2 = _rational_q_params(spec)
        Q = dphi / (phi - s * dphi)
        num = (
            ((m + 2.0) * c1 * c1 - c2) * s**4
            + m * (m * m - 1.0) * c1 * s * s
            - m * m * (m - 1.0) ** 2
        )
        den = m * (m - 1.0) ** 2 * s * (1.0 - m + c1 * s * s)
        # the printed rational form carries a global sign flip relative to
        # phi'/(phi - s phi') for every family it covers; compare against -num/den
        return abs(Q + num / den)

    if identity_id == "w69":
        m, k = spec.m, spec.k
        lhs = (phi - s * dphi + (b2 - s * s) * d2phi) / (
            s * phi + (b2 - s * s) * dphi
        )
        rhs = (m - 1.0) / (s * (1.0 - k * s * s))
        return abs(lhs - rhs)

    if identity_id == "y56":
        m = family_m(spec)
        a_m2 = _series_coefficient_shift(spec)
        mu = m * (m - 1.0)
        lam = m * (m - 1.0) + 2.0 * a_m2 * b2
        eta = mu * b2
        delta = lam * b2 - (m + 1.0) / m * mu * b2
        lhs = (delta * s * s + eta * (b2 - s * s)) * d2phi
        rhs = (lam * s * s + mu * (b2 - s * s)) * (
            phi - s * dphi + (b2 - s * s) * d2phi
        )
        return abs(lhs - rhs)

    raise PhiDomainError(f"unknown identity {identity_id!r}")


# ---------------------------------------------------------------------------
# regularity
# ---------------------------------------------------------------------------


@dataclass
class RegularityReport:
    ok: bool
    violation_s: float | None = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def regularity_check(spec: PhiSpec, b0: float, rho: float, n_grid: int = 201) -> RegularityReport:
    """Check phi > 0 and phi - s phi' + (rho^2 - s^2) phi'' > 0 on |s| <= rho.

    Families that are singular somewhere on the grid (including at s = 0)
    report the first offending s.
    """
    if not 0.0 < rho < b0:
        raise PhiDomainError("need 0 < rho < b0")
    for s in np.linspace(-rho, rho, n_grid):
        s = float(s)
        try:
            phi, dphi, d2phi = _derivatives(spec, s, 2)
        except (PhiDomainError, ArithmeticError) as err:
            return RegularityReport(False, s, f"evaluation failed: {err}")
        if not phi > 0.0:
            return RegularityReport(False, s, f"phi(s) = {phi} is not positive")
        second = phi - s * dphi + (rho * rho - s * s) * d2phi
        if not second > 0.0:
            return RegularityReport(
                False, s, f"phi - s phi' + (rho^2-s^2) phi'' = {second} is not positive"
            )
    return RegularityReport(True)
