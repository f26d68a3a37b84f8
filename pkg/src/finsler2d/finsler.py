"""Assembly of the Finsler metric F = alpha * phi(beta/alpha) and its spray.

The whole composite (metric fields, covariant data, phi machinery, spray) is
evaluated in jet arithmetic over the four variables (x1, x2, y1, y2), so any
mixed partial of the spray coefficients up to the requested order can be read
off exactly.  The curvature module drives this to order five; plain spray
values need order zero.

Two spray paths exist on purpose: :func:`finsler_spray` assembles the
covariant-data formula, while :func:`direct_spray_oracle` differentiates
F^2 and inverts the fundamental tensor, sharing nothing but the field
evaluations.  Their agreement is a standing cross-check of the whole stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprlang import MetricDef
from .geometry import christoffel_polys, field_polys
from .jets import TaylorPoly, get_context
from .phi import PhiDomainError, phi_polys


class FinslerDomainError(ValueError):
    """The metric or a direction left the domain of some ingredient."""


X_SLOTS = (0, 1)
Y_SLOTS = (2, 3)


@dataclass
class SprayEval:
    """Spray coefficients and their low-order derivatives at one (x, y)."""

    x: np.ndarray
    y: np.ndarray
    F: float
    G: np.ndarray  # G^i
    G_alpha: np.ndarray  # G^i of alpha
    N: np.ndarray  # N^i_j = dG^i/dy^j
    G_conn: np.ndarray  # G^i_jk = d2 G^i / dy^j dy^k
    Gx: np.ndarray  # dG^i/dx^j


class SprayField:
    """Jets of everything the downstream modules consume, at one (x, y)."""

    def __init__(self, md: MetricDef, x, y, order: int):
        if md.dim != 2:
            raise FinslerDomainError("the spray engine is built for dim 2")
        if md.phi is None:
            raise FinslerDomainError("metric definition carries no phi data")
        self.md = md
        self.order = order
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        values = [*self.x, *self.y]
        ctx = get_context(4, order + 1)
        a, b, ainv = field_polys(md, ctx, values)
        yp = [TaylorPoly.variable(ctx, Y_SLOTS[i], self.y[i]) for i in range(2)]

        alpha2 = a[0][0] * yp[0] * yp[0] + 2.0 * (a[0][1] * yp[0] * yp[1]) + a[1][1] * yp[1] * yp[1]
        if alpha2.value <= 0.0:
            raise FinslerDomainError(f"alpha^2 = {alpha2.value} is not positive at y={tuple(self.y)}")
        alpha = alpha2.sqrt()
        beta = b[0] * yp[0] + b[1] * yp[1]
        b_up = [ainv[i][0] * b[0] + ainv[i][1] * b[1] for i in range(2)]
        b2 = b[0] * b_up[0] + b[1] * b_up[1]
        s = beta / alpha

        gamma = christoffel_polys(a, ainv, X_SLOTS)
        g_alpha = []
        for i in range(2):
            acc = None
            for j in range(2):
                for k in range(2):
                    term = gamma[i][j][k] * yp[j] * yp[k]
                    acc = term if acc is None else acc + term
            g_alpha.append(0.5 * acc)

        nabla = [[None, None], [None, None]]
        for i in range(2):
            for j in range(2):
                term = b[i].deriv(X_SLOTS[j])
                for mm in range(2):
                    term = term - b[mm] * gamma[mm][i][j]
                nabla[i][j] = term
        r = [[0.5 * (nabla[i][j] + nabla[j][i]) for j in range(2)] for i in range(2)]
        ss = [[0.5 * (nabla[i][j] - nabla[j][i]) for j in range(2)] for i in range(2)]

        r00 = None
        for i in range(2):
            for j in range(2):
                term = r[i][j] * yp[i] * yp[j]
                r00 = term if r00 is None else r00 + term
        s_vec = [b_up[0] * ss[0][j] + b_up[1] * ss[1][j] for j in range(2)]
        s0 = s_vec[0] * yp[0] + s_vec[1] * yp[1]
        s0_up = []
        for i in range(2):
            acc = None
            for l in range(2):
                for k in range(2):
                    term = ainv[i][l] * ss[l][k] * yp[k]
                    acc = term if acc is None else acc + term
            s0_up.append(acc)

        try:
            phi, dphi, d2phi = phi_polys(md.phi, s.truncated(order), nder=2)
        except PhiDomainError as err:
            raise FinslerDomainError(f"phi domain: {err}") from err

        denom = phi - s * dphi
        if denom.value == 0.0:
            raise FinslerDomainError(
                f"phi - s phi' vanishes at s={s.value} (Randers-degenerate direction)"
            )
        Q = dphi / denom
        Qp = phi * d2phi / (denom * denom)
        delta = 1.0 + s * Q + (b2 - s * s) * Qp
        if delta.value == 0.0:
            raise FinslerDomainError(f"Delta vanishes at s={s.value}")
        theta = (Q - s * Qp) / (2.0 * delta)
        psi = Qp / (2.0 * delta)

        core = -2.0 * (alpha * Q * s0) + r00
        G = []
        for i in range(2):
            gi = (
                g_alpha[i]
                + alpha * Q * s0_up[i]
                + theta * core * yp[i] / alpha
                + psi * core * b_up[i]
            )
            G.append(gi)

        self.a, self.b, self.ainv = a, b, ainv
        self.yp = yp
        self.alpha2, self.alpha, self.beta, self.s = alpha2, alpha, beta, s
        self.b2 = b2
        self.gamma = gamma
        self.g_alpha = g_alpha
        self.nabla, self.r, self.ss = nabla, r, ss
        self.r00, self.s_vec, self.s0, self.s0_up = r00, s_vec, s0, s0_up
        self.phi, self.dphi, self.d2phi = phi, dphi, d2phi
        self.Q, self.Qp, self.delta, self.theta, self.psi = Q, Qp, delta, theta, psi
        self.G = G
        self.F = alpha * phi

    def spray_eval(self) -> SprayEval:
        G = np.array([g.value for g in self.G])
        G_alpha = np.array([g.value for g in self.g_alpha])
        N = np.array([[self.G[i].deriv(Y_SLOTS[j]).value for j in range(2)] for i in range(2)])
        G_conn = np.array(
            [
                [
                    [self.G[i].deriv(Y_SLOTS[j]).deriv(Y_SLOTS[k]).value for k in range(2)]
                    for j in range(2)
                ]
                for i in range(2)
            ]
        )
        Gx = np.array([[self.G[i].deriv(X_SLOTS[j]).value for j in range(2)] for i in range(2)])
        return SprayEval(
            x=self.x, y=self.y, F=self.F.value, G=G, G_alpha=G_alpha,
            N=N, G_conn=G_conn, Gx=Gx,
        )


def finsler_spray(md: MetricDef, x, y, order: int = 2) -> SprayEval:
    """Spray coefficients of F via the covariant-data assembly."""
    return SprayField(md, x, y, max(order, 2)).spray_eval()


def spray_values(md: MetricDef, x, y) -> np.ndarray:
    """Just G^i at (x, y); the cheapest jet depth that is exact."""
    return np.array([g.value for g in SprayField(md, x, y, 0).G])


class SingularFundamentalTensor(FinslerDomainError):
    def __init__(self, det: float):
        self.det = det
        super().__init__(f"fundamental tensor is singular (det g = {det})")


def direct_spray_oracle(md: MetricDef, x, y) -> np.ndarray:
    """Spray coefficients from first principles.

    Differentiates F^2 in jets, builds the fundamental tensor
    g_ij = (1/2) d2 F^2 / dy^i dy^j, and assembles a quarter of
    g^il { d_x^k d_y^l F^2 y^k - d_x^l F^2 }.  Fully independent of the
    covariant-data path.
    """
    if md.phi is None:
        raise FinslerDomainError("metric definition carries no phi data")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values = [*x, *y]
    ctx = get_context(4, 2)
    a, b, ainv = field_polys(md, ctx, values)
    yp = [TaylorPoly.variable(ctx, Y_SLOTS[i], y[i]) for i in range(2)]
    alpha2 = a[0][0] * yp[0] * yp[0] + 2.0 * (a[0][1] * yp[0] * yp[1]) + a[1][1] * yp[1] * yp[1]
    if alpha2.value <= 0.0:
        raise FinslerDomainError(f"alpha^2 = {alpha2.value} is not positive")
    alpha = alpha2.sqrt()
    beta = b[0] * yp[0] + b[1] * yp[1]
    s = beta / alpha
    try:
        (phi,) = phi_polys(md.phi, s, nder=0)
    except PhiDomainError as err:
        raise FinslerDomainError(f"phi domain: {err}") from err
    F2 = alpha2 * phi * phi

    def partial2(p, u, v):
        alpha_idx = [0, 0, 0, 0]
        alpha_idx[u] += 1
        alpha_idx[v] += 1
        return p.partial(tuple(alpha_idx))

    g = np.array(
        [[0.5 * partial2(F2, Y_SLOTS[i], Y_SLOTS[j]) for j in range(2)] for i in range(2)]
    )
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    scale = max(np.max(np.abs(g)), 1e-300)
    if abs(det) <= 1e-12 * scale**2:
        raise SingularFundamentalTensor(det)
    g_inv = np.linalg.inv(g)

    def dx(l):
        alpha_idx = [0, 0, 0, 0]
        alpha_idx[l] += 1
        return F2.partial(tuple(alpha_idx))

    rhs = np.array(
        [
            sum(partial2(F2, X_SLOTS[k], Y_SLOTS[l]) * y[k] for k in range(2)) - dx(X_SLOTS[l])
            for l in range(2)
        ]
    )
    return 0.25 * g_inv @ rhs


def finsler_norm(md: MetricDef, x, y) -> float:
    """F(x, y)."""
    if md.phi is None:
        raise FinslerDomainError("metric definition carries no phi data")
    field = SprayField(md, x, y, 0)
    return field.F.value


def hamel_residual(md: MetricDef, x, y) -> np.ndarray:
    """Componentwise value of F_{x^m y^l} y^m - F_{x^l}.

    Vanishes exactly when F is projectively flat in this chart; probing
    non-projective charts is legitimate, the caller decides on thresholds.
    """
    if md.phi is None:
        raise FinslerDomainError("metric definition carries no phi data")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ctx = get_context(4, 2)
    a, b, _ = field_polys(md, ctx, [*x, *y])
    yp = [TaylorPoly.variable(ctx, Y_SLOTS[i], y[i]) for i in range(2)]
    alpha2 = a[0][0] * yp[0] * yp[0] + 2.0 * (a[0][1] * yp[0] * yp[1]) + a[1][1] * yp[1] * yp[1]
    if alpha2.value <= 0.0:
        raise FinslerDomainError(f"alpha^2 = {alpha2.value} is not positive")
    alpha = alpha2.sqrt()
    beta = b[0] * yp[0] + b[1] * yp[1]
    try:
        (phi,) = phi_polys(md.phi, beta / alpha, nder=0)
    except PhiDomainError as err:
        raise FinslerDomainError(f"phi domain: {err}") from err
    F = alpha * phi
    res = np.empty(2)
    for l in range(2):
        acc = 0.0
        for m in range(2):
            acc += F.deriv(X_SLOTS[m]).deriv(Y_SLOTS[l]).value * y[m]
        res[l] = acc - F.deriv(X_SLOTS[l]).value
    return res


@dataclass
class ProjectiveFactor:
    """P together with the Hamel-residual status of the chart."""

    P: float
    hamel_norm: float
    projective_chart: bool


def projective_factor(md: MetricDef, x, y, hamel_tol: float = 1e-8) -> ProjectiveFactor:
    """P = F_{x^m} y^m / (2F), flagged by whether this chart looks projective.

    The flag is advisory: probing a non-projective chart is allowed and
    reports ``projective_chart=False`` rather than raising.
    """
    if md.phi is None:
        raise FinslerDomainError("metric definition carries no phi data")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    field = SprayField(md, x, y, 1)
    F = field.F
    if F.value == 0.0:
        raise FinslerDomainError("F vanishes at (x, y)")
    num = sum(F.deriv(X_SLOTS[m]).value * y[m] for m in range(2))
    P = num / (2.0 * F.value)
    res = hamel_residual(md, x, y)
    scale = max(abs(F.value), 1.0)
    norm = float(np.max(np.abs(res)))
    return ProjectiveFactor(P=P, hamel_norm=norm, projective_chart=norm <= hamel_tol * scale)
