"""Riemannian base layer: metric data, Christoffel symbols, spray of alpha,
covariant derivatives of beta, and Gauss curvature.

Everything is produced from jet evaluations of the metric-definition fields,
so derivative data is exact up to roundoff.  The spray of alpha is exposed
through two independent code paths (Christoffel contraction and the direct
second-derivative formula for the quadratic norm), which the test suite plays
against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprlang import MetricDef
from .jets import TaylorPoly, eval_expr_poly, get_context


class GeometryError(ValueError):
    pass


class PositiveDefiniteError(GeometryError):
    """The a-matrix failed its positive-definiteness pivot check."""


@dataclass
class MetricAt:
    """Pointwise metric data with x-derivatives of a to order 3, b to order 2."""

    x: np.ndarray
    a: np.ndarray
    a_inv: np.ndarray
    da1: np.ndarray  # da1[k, i, j]       = d_k a_ij
    da2: np.ndarray  # da2[k, l, i, j]    = d_k d_l a_ij
    da3: np.ndarray  # da3[k, l, m, i, j] = d_k d_l d_m a_ij
    b: np.ndarray
    db1: np.ndarray  # db1[k, i] = d_k b_i
    db2: np.ndarray  # db2[k, l, i]
    b_up: np.ndarray
    b2: float


@dataclass
class CovariantData:
    """r/s decomposition of the covariant derivative of beta, plus contractions."""

    x: np.ndarray
    y: np.ndarray
    nabla_b: np.ndarray  # b_{i|j}
    r: np.ndarray
    s: np.ndarray
    r_vec: np.ndarray  # r_j = b^i r_ij
    s_vec: np.ndarray  # s_j = b^i s_ij
    s_up: np.ndarray  # s^i = a^ik s_k
    r00: float  # r_ij y^i y^j
    s0: float  # s_j y^j
    s0_up: np.ndarray  # s^i_k y^k


def field_polys(md: MetricDef, ctx, values):
    """Evaluate a_ij, b_i (and for dim 2 the inverse metric) as jets.

    ``values`` holds one evaluation value per jet-variable slot; the metric
    expressions read coordinate i from slot i-1, extra slots (directions) are
    simply never referenced by the fields.
    """
    n = md.dim
    a = [[eval_expr_poly(md.a[i][j], ctx, values) for j in range(n)] for i in range(n)]
    b = [eval_expr_poly(md.b[i], ctx, values) for i in range(n)]
    if n == 2:
        det = a[0][0] * a[1][1] - a[0][1] * a[0][1]
        if det.value <= 0.0:
            raise PositiveDefiniteError(
                f"det(a) = {det.value} is not positive at {tuple(values[:n])}"
            )
        inv_det = det.recip()
        ainv = [
            [a[1][1] * inv_det, -(a[0][1] * inv_det)],
            [-(a[0][1] * inv_det), a[0][0] * inv_det],
        ]
    else:
        ainv = None
    return a, b, ainv


def christoffel_polys(a, ainv, xslots):
    """gamma^i_jk as jets (one order below the metric jets)."""
    n = len(a)
    da = [[[a[i][j].deriv(xslots[k]) for k in range(n)] for j in range(n)] for i in range(n)]
    gamma = []
    for i in range(n):
        row = []
        for j in range(n):
            col = []
            for k in range(n):
                acc = None
                for l in range(n):
                    term = ainv[i][l] * (da[l][k][j] + da[l][j][k] - da[j][k][l])
                    acc = term if acc is None else acc + term
                col.append(0.5 * acc)
            row.append(col)
        gamma.append(row)
    return gamma


def _check_spd(a: np.ndarray, x):
    scale = np.max(np.abs(a))
    tol = 1e-12 * max(scale, 1e-300)
    # LDL pivots with explicit tolerance
    if a[0, 0] <= tol:
        raise PositiveDefiniteError(f"a11 = {a[0, 0]} fails the pivot check at {tuple(x)}")
    for k in range(2, a.shape[0] + 1):
        if np.linalg.det(a[:k, :k]) <= tol**k:
            raise PositiveDefiniteError(
                f"leading {k}x{k} minor of a is not positive at {tuple(x)}"
            )


def metric_at(md: MetricDef, x) -> MetricAt:
    n = md.dim
    x = np.asarray(x, dtype=float)
    ctx = get_context(n, 3)
    a_p, b_p, _ = field_polys(md, ctx, list(x))

    a = np.array([[a_p[i][j].value for j in range(n)] for i in range(n)])
    _check_spd(a, x)
    a_inv = np.linalg.inv(a)

    idx = {v: tuple(1 if t == v else 0 for t in range(n)) for v in range(n)}

    def d1(p, k):
        return p.partial(idx[k])

    da1 = np.array([[[d1(a_p[i][j], k) for j in range(n)] for i in range(n)] for k in range(n)])
    da2 = np.empty((n, n, n, n))
    da3 = np.empty((n, n, n, n, n))
    for k in range(n):
        for l in range(n):
            for i in range(n):
                for j in range(n):
                    alpha = [0] * n
                    alpha[k] += 1
                    alpha[l] += 1
                    da2[k, l, i, j] = a_p[i][j].partial(tuple(alpha))
                    for m in range(n):
                        alpha3 = list(alpha)
                        alpha3[m] += 1
                        da3[k, l, m, i, j] = a_p[i][j].partial(tuple(alpha3))

    b = np.array([p.value for p in b_p])
    db1 = np.array([[d1(b_p[i], k) for i in range(n)] for k in range(n)])
    db2 = np.empty((n, n, n))
    for k in range(n):
        for l in range(n):
            for i in range(n):
                alpha = [0] * n
                alpha[k] += 1
                alpha[l] += 1
                db2[k, l, i] = b_p[i].partial(tuple(alpha))

    b_up = a_inv @ b
    b2 = float(b @ b_up)
    return MetricAt(
        x=x, a=a, a_inv=a_inv, da1=da1, da2=da2, da3=da3,
        b=b, db1=db1, db2=db2, b_up=b_up, b2=b2,
    )


def christoffel(md: MetricDef, x) -> np.ndarray:
    """gamma[i, j, k] = gamma^i_jk at x."""
    m = metric_at(md, x)
    n = md.dim
    gamma = np.zeros((n, n, n))
    # da1[k, i, j] = d_k a_ij
    for i in range(n):
        for j in range(n):
            for k in range(n):
                acc = 0.0
                for l in range(n):
                    acc += m.a_inv[i, l] * (
                        m.da1[j, l, k] + m.da1[k, l, j] - m.da1[l, j, k]
                    )
                gamma[i, j, k] = 0.5 * acc
    return gamma


def riemann_spray(md: MetricDef, x, y) -> np.ndarray:
    """Spray coefficients of alpha by Christoffel contraction."""
    gamma = christoffel(md, x)
    y = np.asarray(y, dtype=float)
    return 0.5 * np.einsum("ijk,j,k->i", gamma, y, y)


def riemann_spray_direct(md: MetricDef, x, y) -> np.ndarray:
    """Spray coefficients of alpha by the direct quadratic-norm formula.

    Independent of the Christoffel path: evaluates the jets of the squared
    norm and assembles a quarter of a^il { d_x^k d_y^l (alpha^2) y^k -
    d_x^l (alpha^2) }.
    """
    n = md.dim
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ctx = get_context(2 * n, 2)
    values = list(x) + list(y)
    a_p, _, _ = field_polys(md, ctx, values)
    yp = [TaylorPoly.variable(ctx, n + i, y[i]) for i in range(n)]
    alpha2 = None
    for i in range(n):
        for j in range(n):
            term = a_p[i][j] * yp[i] * yp[j]
            alpha2 = term if alpha2 is None else alpha2 + term

    a = np.array([[a_p[i][j].value for j in range(n)] for i in range(n)])
    _check_spd(a, x)
    a_inv = np.linalg.inv(a)

    def mixed(k, l):
        alpha = [0] * (2 * n)
        alpha[k] += 1
        alpha[n + l] += 1
        return alpha2.partial(tuple(alpha))

    def dx(l):
        alpha = [0] * (2 * n)
        alpha[l] += 1
        return alpha2.partial(tuple(alpha))

    rhs = np.array([sum(mixed(k, l) * y[k] for k in range(n)) - dx(l) for l in range(n)])
    return 0.25 * a_inv @ rhs


def covariant_data(md: MetricDef, x, y) -> CovariantData:
    m = metric_at(md, x)
    n = md.dim
    y = np.asarray(y, dtype=float)
    gamma = christoffel(md, x)
    # db1[j, i] = d_j b_i; b_{i|j} = d_j b_i - b_m gamma^m_ij
    nabla = np.array(
        [
            [m.db1[j, i] - sum(m.b[mm] * gamma[mm, i, j] for mm in range(n)) for j in range(n)]
            for i in range(n)
        ]
    )
    r = 0.5 * (nabla + nabla.T)
    s = 0.5 * (nabla - nabla.T)
    r_vec = m.b_up @ r
    s_vec = m.b_up @ s
    s_up = m.a_inv @ s_vec
    r00 = float(y @ r @ y)
    s0 = float(s_vec @ y)
    s0_up = m.a_inv @ s @ y
    return CovariantData(
        x=m.x, y=y, nabla_b=nabla, r=r, s=s,
        r_vec=r_vec, s_vec=s_vec, s_up=s_up,
        r00=r00, s0=s0, s0_up=s0_up,
    )


def gauss_curvature(md: MetricDef, x) -> float:
    """Sectional curvature of alpha at x (two-dimensional charts only)."""
    if md.dim != 2:
        raise GeometryError("gauss_curvature is implemented for dim 2")
    x = np.asarray(x, dtype=float)
    ctx = get_context(2, 2)
    a_p, _, ainv_p = field_polys(md, ctx, list(x))
    a = np.array([[a_p[i][j].value for j in range(2)] for i in range(2)])
    _check_spd(a, x)
    gamma_p = christoffel_polys(a_p, ainv_p, (0, 1))
    gamma = np.array(
        [[[gamma_p[i][j][k].value for k in range(2)] for j in range(2)] for i in range(2)]
    )
    dgamma = np.array(
        [
            [[[gamma_p[i][j][k].deriv(l).value for l in range(2)] for k in range(2)] for j in range(2)]
            for i in range(2)
        ]
    )  # dgamma[i, j, k, l] = d_l gamma^i_jk

    # R^rho_{sigma mu nu} = d_mu G^rho_{nu sigma} - d_nu G^rho_{mu sigma}
    #                     + G^rho_{mu lam} G^lam_{nu sigma} - G^rho_{nu lam} G^lam_{mu sigma}
    def riem(rho, sigma, mu, nu):
        val = dgamma[rho, nu, sigma, mu] - dgamma[rho, mu, sigma, nu]
        for lam in range(2):
            val += gamma[rho, mu, lam] * gamma[lam, nu, sigma]
            val -= gamma[rho, nu, lam] * gamma[lam, mu, sigma]
        return val

    r_1212 = sum(a[0, rho] * riem(rho, 1, 0, 1) for rho in range(2))
    det = a[0, 0] * a[1, 1] - a[0, 1] ** 2
    return float(r_1212 / det)
