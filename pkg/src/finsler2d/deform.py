"""Metric deformations and explicit constructors.

All deformations compose ASTs, never numbers, so a deformed metric runs
through the full engine including third-order derivatives.  For dim 2 the
inverse metric is closed-form (adjugate over determinant), which keeps the
squared norm of beta available as an expression and the whole pipeline
differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exprlang import Const, Expr, MetricDef, exp, log, parse_expr
from .geometry import metric_at
from .jets import eval_jet
from .phi import PhiSpec
from .sampling import DEFAULT_REGION


class DeformError(ValueError):
    pass


def _grid_points(region=DEFAULT_REGION, n: int = 4) -> np.ndarray:
    xs = np.linspace(region[0][0], region[0][1], n)
    ys = np.linspace(region[1][0], region[1][1], n)
    return np.array([(a, b) for a in xs for b in ys])


def _powf_expr(e: Expr, p: float) -> Expr:
    """e^p as an AST: integer powers directly, otherwise exp(p*log(e))."""
    if abs(p - round(p)) < 1e-12 and abs(round(p)) <= 64:
        n = int(round(p))
        if n == 1:
            return e
        return e**n
    return exp(Const(float(p)) * log(e))


def b2_expr(md: MetricDef) -> Expr:
    """||beta||^2 with respect to a, as an expression (dim 2)."""
    if md.dim != 2:
        raise DeformError("symbolic b^2 needs dim 2")
    a11, a12, a22 = md.a[0][0], md.a[0][1], md.a[1][1]
    b1, b2 = md.b
    det = a11 * a22 - a12 * a12
    num = a22 * b1 * b1 - 2.0 * (a12 * b1 * b2) + a11 * b2 * b2
    return num / det


@dataclass
class HarmonicPair:
    """Component functions of a complex-analytic map, validated numerically."""

    u: Expr
    v: Expr

    def cr_residual(self, x) -> float:
        ju = eval_jet(self.u, x, 1)
        jv = eval_jet(self.v, x, 1)
        return max(
            abs(ju.partial((1, 0)) - jv.partial((0, 1))),
            abs(ju.partial((0, 1)) + jv.partial((1, 0))),
        )

    def validate(self, points=None, tol: float = 1e-9):
        if points is None:
            points = _grid_points()
        for p in points:
            res = self.cr_residual(p)
            if res > tol:
                raise DeformError(
                    f"pair is not conjugate-harmonic: residual {res:.3e} at {tuple(p)}"
                )
        return self


@dataclass
class DeformedMetric:
    """A symbolically deformed metric plus its provenance."""

    metric: MetricDef
    kind: str
    params: dict = field(default_factory=dict)


def kropina_deform(md: MetricDef, m: float) -> DeformedMetric:
    """Rescale (a, b) by powers of b so the new beta has unit norm.

    a~_ij = b^{2m} a_ij and b~_i = b^{m-1} b_i; for F = beta^m alpha^(1-m)
    the metric F itself is unchanged by construction.
    """
    bb = b2_expr(md)
    scale_a = _powf_expr(bb, m)  # b^{2m}
    scale_b = _powf_expr(bb, (m - 1.0) / 2.0)  # b^{m-1}
    n = md.dim
    a = [[scale_a * md.a[i][j] for j in range(n)] for i in range(n)]
    b = [scale_b * md.b[i] for i in range(n)]
    return DeformedMetric(
        metric=MetricDef(n, a, b, md.phi),
        kind="kropina",
        params={"m": m},
    )


def m3_deform(md: MetricDef, c: float, points=None) -> DeformedMetric:
    """The alpha-deformation adapted to F = c beta + alpha^4 / beta^3.

    a~ = xi a + eta b (x) b with
    xi = 1/(b^2 (4+3c b^4)), eta = 3 (5 + 8c b^4 + 3 c^2 b^8) / (b^4 (4+3c b^4));
    beta is kept.  Requires 4 + 3 c b^4 > 0 and b^2 > 0 on the region.
    """
    bb = b2_expr(md)
    if points is None:
        points = _grid_points()
    for p in points:
        v = eval_jet(bb, p, 0).value
        if v <= 0.0:
            raise DeformError(f"b^2 = {v} is not positive at {tuple(p)}")
        if 4.0 + 3.0 * c * v * v <= 0.0:
            raise DeformError(f"4 + 3c b^4 = {4 + 3 * c * v * v} fails at {tuple(p)}")
    b4 = bb * bb
    b8 = b4 * b4
    denom = 4.0 + 3.0 * c * b4
    xi = 1.0 / (bb * denom)
    eta = 3.0 * (5.0 + 8.0 * c * b4 + 3.0 * c * c * b8) / (b4 * denom)
    n = md.dim
    a = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            a[i][j] = xi * md.a[i][j] + eta * (md.b[i] * md.b[j])
            a[j][i] = a[i][j]
    return DeformedMetric(
        metric=MetricDef(n, a, list(md.b), md.phi),
        kind="m3",
        params={"c": c},
    )


def bar_alpha(md: MetricDef, k: float, points=None) -> DeformedMetric:
    """a-bar_ij = a_ij + k b_i b_j (Riemannian as long as 1 + k b^2 > 0)."""
    if points is None:
        points = _grid_points()
    bb = b2_expr(md)
    for p in points:
        v = eval_jet(bb, p, 0).value
        if 1.0 + k * v <= 0.0:
            raise DeformError(
                f"1 + k b^2 = {1 + k * v} is not positive at {tuple(p)}; "
                "the deformed norm is degenerate"
            )
    n = md.dim
    a = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            a[i][j] = md.a[i][j] + Const(float(k)) * (md.b[i] * md.b[j])
            a[j][i] = a[i][j]
    return DeformedMetric(
        metric=MetricDef(n, a, list(md.b), md.phi),
        kind="bar_alpha",
        params={"k": k},
    )


def construct_thm12_ii(B: Expr, pair: HarmonicPair, c: float, points=None) -> MetricDef:
    """Douglas metrics of the family F = c beta + alpha^4 / beta^3.

    alpha^2 = B^3/(u^2+v^2) |y|^2 - 3(5+3cB^2)(1+cB^2)/B beta^2,
    beta = B^2 / ((4+3cB^2)(u^2+v^2)) (u y^1 + v y^2),
    with (u, v) conjugate harmonic and B > 0.
    """
    pair.validate(points)
    if points is None:
        points = _grid_points()
    uv2 = pair.u * pair.u + pair.v * pair.v
    b_scale = B * B / ((4.0 + 3.0 * c * B * B) * uv2)
    b = [b_scale * pair.u, b_scale * pair.v]
    diag = B**3 / uv2
    coef = 3.0 * (5.0 + 3.0 * c * B * B) * (1.0 + c * B * B) / B
    a = [
        [diag - coef * b[0] * b[0], -(coef * b[0] * b[1])],
        [-(coef * b[0] * b[1]), diag - coef * b[1] * b[1]],
    ]
    md = MetricDef(2, a, b, PhiSpec("thm41_ii", k1=float(c), k2=0.0))
    for p in points:
        metric_at(md, p)  # raises PositiveDefiniteError on failure
    return md


@dataclass
class Rem61Construction:
    metric: MetricDef
    third_equation_holds: bool
    third_equation_max: float


def construct_rem61(
    pair: HarmonicPair, eta: Expr, m: float, c: float, points=None, tol: float = 1e-9
) -> Rem61Construction:
    """Metrics F = c beta + beta^m alpha^(1-m) over a flat base chart.

    alpha = eta^(m/(m-1)) sqrt(|y|^2/(u^2+v^2)), beta = eta (u y^1 + v y^2)/(u^2+v^2).
    The returned flag records whether eta_1 v = eta_2 u holds on the sampled
    region; when it does, beta is closed and the metric is projectively flat
    for every admissible c.
    """
    pair.validate(points)
    if points is None:
        points = _grid_points()
    uv2 = pair.u * pair.u + pair.v * pair.v
    a_diag = _powf_expr(eta, 2.0 * m / (m - 1.0)) / uv2
    zero = Const(0.0)
    b = [eta * pair.u / uv2, eta * pair.v / uv2]
    if c == 0.0:
        spec = PhiSpec("m_kropina", m=float(m))
    else:
        spec = PhiSpec("thm41_iii", k1=float(c), k2=0.0, m=float(m))
    md = MetricDef(2, [[a_diag, zero], [zero, a_diag]], b, spec)

    worst = 0.0
    for p in points:
        je = eval_jet(eta, p, 1)
        uu = eval_jet(pair.u, p, 0).value
        vv = eval_jet(pair.v, p, 0).value
        res = abs(je.partial((1, 0)) * vv - je.partial((0, 1)) * uu)
        worst = max(worst, res)
        if eval_jet(eta, p, 0).value <= 0.0:
            raise DeformError(f"eta must be positive, fails at {tuple(p)}")
        metric_at(md, p)
    return Rem61Construction(
        metric=md, third_equation_holds=worst <= tol, third_equation_max=worst
    )


# canonical flat-base ingredients for the constructors
def radial_pair() -> HarmonicPair:
    return HarmonicPair(parse_expr("x1", 2), parse_expr("x2", 2))


def rotational_pair() -> HarmonicPair:
    return HarmonicPair(parse_expr("x2", 2), parse_expr("-x1", 2))


def norm_power_eta(m: float) -> Expr:
    """eta = |x|^(1-m) as an expression."""
    return _powf_expr(parse_expr("x1^2+x2^2", 2), (1.0 - m) / 2.0)
