"""Numerical Douglas test, adapted-frame residuals, covariant-derivative
condition checkers, spray-form fits, projective-factor formulas, and a
region classifier.

The Douglas fit is a least-squares proxy for an exact algebraic property:
G^1 y^2 - G^2 y^1 is a homogeneous cubic in y exactly when the metric is
Douglas, so the relative misfit of a cubic model over two dozen directions
separates exact cases (~1e-12) from generic negatives (>1e-4) by many
orders of magnitude.  The default pass threshold 1e-7 is configurable.

Connection-difference components are recovered in the gauge G^1_12 = G^2_12
= 0; every quantity consumed downstream (adapted-frame residuals) is
invariant under that gauge choice.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .exprlang import MetricDef
from .finsler import FinslerDomainError, finsler_norm, spray_values
from .geometry import christoffel, covariant_data, metric_at
from .phi import family_m, linear_coefficient, phi_eval
from .sampling import direction_samples

DOUGLAS_THRESHOLD = 1e-7
CONDITION_THRESHOLD = 1e-7

_CUBIC = ((3, 0), (2, 1), (1, 2), (0, 3))


@dataclass
class DouglasFit:
    """Cubic-model fit of G^1 y^2 - G^2 y^1 at one point."""

    x: np.ndarray
    Gamma: np.ndarray  # fitted symmetric connection (gauge-fixed)
    residual: float  # relative least-squares misfit
    G_kl: np.ndarray  # Gamma minus the Christoffel symbols of alpha
    samples_used: int
    threshold: float = DOUGLAS_THRESHOLD

    @property
    def is_douglas(self) -> bool:
        return self.residual <= self.threshold

    def to_dict(self) -> dict:
        return {
            "x": list(map(float, self.x)),
            "residual": float(self.residual),
            "verdict": "pass" if self.is_douglas else "fail",
            "samples_used": int(self.samples_used),
            "threshold": float(self.threshold),
        }


def _cubic_design(ys: np.ndarray) -> np.ndarray:
    return np.array([[y[0] ** p * y[1] ** q for (p, q) in _CUBIC] for y in ys])


def douglas_fit(
    md: MetricDef,
    x,
    samples: np.ndarray | None = None,
    threshold: float = DOUGLAS_THRESHOLD,
    n_angles: int = 24,
) -> DouglasFit:
    """Fit the degree-three model and recover the connection difference."""
    x = np.asarray(x, dtype=float)
    if samples is None:
        samples = direction_samples(md, x, n_angles=n_angles)
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 12:
        raise ValueError(f"need at least 12 sample directions, got {len(samples)}")

    g_vals = np.array([spray_values(md, x, y) for y in samples])
    d12 = g_vals[:, 0] * samples[:, 1] - g_vals[:, 1] * samples[:, 0]
    design = _cubic_design(samples)
    coeffs, _, rank, _ = np.linalg.lstsq(design, d12, rcond=None)
    if rank < 4:
        raise ValueError("rank-deficient cubic fit; vary the sample directions")
    misfit = design @ coeffs - d12
    rms_misfit = float(np.sqrt(np.mean(misfit**2)))
    rms_d12 = float(np.sqrt(np.mean(d12**2)))
    # floor the scale at a fraction of the spray magnitude: when the chart is
    # itself projective, d12 is pure cancellation noise and would otherwise
    # be compared against itself
    rms_g = float(np.sqrt(np.mean(g_vals**2)))
    scale = max(rms_d12, 1e-6 * rms_g, 1e-300)
    residual = 0.0 if rms_misfit == 0.0 else rms_misfit / scale

    gamma = christoffel(md, x)
    alpha_coeffs = np.array(
        [
            -0.5 * gamma[1, 0, 0],
            0.5 * gamma[0, 0, 0] - gamma[1, 0, 1],
            gamma[0, 0, 1] - 0.5 * gamma[1, 1, 1],
            0.5 * gamma[0, 1, 1],
        ]
    )
    c = coeffs - alpha_coeffs
    # invariant combinations, then the G^1_12 = G^2_12 = 0 gauge
    g_kl = np.zeros((2, 2, 2))
    g_kl[0, 0, 0] = 2.0 * c[1]  # G^1_11 - G^2_12 - G^2_21
    g_kl[0, 1, 1] = 2.0 * c[3]  # G^1_22
    g_kl[1, 0, 0] = -2.0 * c[0]  # G^2_11
    g_kl[1, 1, 1] = -2.0 * c[2]  # G^2_22 - G^1_12 - G^1_21
    return DouglasFit(
        x=x,
        Gamma=gamma + g_kl,
        residual=residual,
        G_kl=g_kl,
        samples_used=len(samples),
        threshold=threshold,
    )


def quadratic_spray_fit(md: MetricDef, x, samples: np.ndarray | None = None) -> float:
    """Relative misfit of a quadratic-in-y model for G^i (Berwald test)."""
    x = np.asarray(x, dtype=float)
    if samples is None:
        samples = direction_samples(md, x)
    g_vals = np.array([spray_values(md, x, y) for y in samples])
    design = np.array([[y[0] ** 2, y[0] * y[1], y[1] ** 2] for y in samples])
    resid = 0.0
    scale = max(float(np.sqrt(np.mean(g_vals**2))), 1e-14)
    for i in range(2):
        coeffs, *_ = np.linalg.lstsq(design, g_vals[:, i], rcond=None)
        misfit = design @ coeffs - g_vals[:, i]
        resid = max(resid, float(np.sqrt(np.mean(misfit**2))))
    return resid / scale


# ---------------------------------------------------------------------------
# adapted frame
# ---------------------------------------------------------------------------


@dataclass
class AdaptedFrame:
    """Linear frame T with T^t a T = I and the covector b pulled to (b, 0)."""

    T: np.ndarray
    T_inv: np.ndarray
    b_norm: float

    def covector(self, w) -> np.ndarray:
        return np.asarray(w) @ self.T

    def two_tensor(self, M) -> np.ndarray:
        return self.T.T @ np.asarray(M) @ self.T

    def connection(self, G) -> np.ndarray:
        # (1,2)-tensor: G'^i_kl = (T^-1)^i_m G^m_pq T^p_k T^q_l
        return np.einsum("im,mpq,pk,ql->ikl", self.T_inv, np.asarray(G), self.T, self.T)


def special_frame(md: MetricDef, x) -> AdaptedFrame:
    """Orthonormalize a at x with the first leg along b."""
    m = metric_at(md, x)
    if m.b2 <= 0.0:
        raise ValueError(f"b vanishes at {tuple(np.asarray(x))}")
    b_norm = float(np.sqrt(m.b2))
    e1 = m.b_up / b_norm
    ae1 = m.a @ e1
    candidates = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    u = min(candidates, key=lambda v: abs(v @ ae1) / np.sqrt(v @ m.a @ v))
    v = u - (u @ ae1) * e1
    e2 = v / np.sqrt(v @ m.a @ v)
    T = np.column_stack([e1, e2])
    return AdaptedFrame(T=T, T_inv=np.linalg.inv(T), b_norm=b_norm)


@dataclass
class ResidualCurves:
    s_grid: np.ndarray
    first: np.ndarray
    second: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(max(np.max(self.first), np.max(self.second)))


def _default_s_grid(b_norm: float, n: int = 9) -> np.ndarray:
    half = np.linspace(0.1 * b_norm, 0.9 * b_norm, n)
    return np.concatenate([-half[::-1], half])


def prop34_residual(
    md: MetricDef,
    x,
    s_grid: np.ndarray | None = None,
    fit: DouglasFit | None = None,
) -> ResidualCurves:
    """Adapted-frame residual curves for the two Douglas identities.

    Uses the fitted connection difference transformed into the frame where
    a = I and b = (b, 0); on Douglas metrics both curves sit at the fit
    noise floor, on non-Douglas inputs they are bounded away from zero.
    """
    if md.phi is None:
        raise FinslerDomainError("prop34_residual needs phi data")
    x = np.asarray(x, dtype=float)
    if fit is None:
        fit = douglas_fit(md, x)
    frame = special_frame(md, x)
    b = frame.b_norm
    b2 = b * b
    if s_grid is None:
        s_grid = _default_s_grid(b)
    cd = covariant_data(md, x, (1.0, 0.0))
    r_f = frame.two_tensor(cd.r)
    s_f = frame.two_tensor(cd.s)
    g_f = frame.connection(fit.G_kl)
    A = g_f[0, 0, 0] - g_f[1, 0, 1] - g_f[1, 1, 0]
    B = g_f[0, 1, 1]
    C = g_f[1, 0, 0]
    D = g_f[1, 1, 1] - g_f[0, 0, 1] - g_f[0, 1, 0]

    first, second = [], []
    for s in np.asarray(s_grid, dtype=float):
        pe = phi_eval(md.phi, float(s), b2)
        w = b2 - s * s
        lhs1 = s * s / (2.0 * w) * A + 0.5 * B
        rhs1 = b * pe.Psi * (r_f[0, 0] * s * s / w + r_f[1, 1])
        first.append(abs(lhs1 - rhs1))
        lhs2 = (-s * s / w + 2.0 * pe.Psi * b2 - 1.0) * b * pe.Q * s_f[0, 1] \
            - 2.0 * b * pe.Psi * r_f[0, 1] * s
        rhs2 = C * s**3 / (2.0 * w) + 0.5 * D * s
        second.append(abs(lhs2 - rhs2))
    return ResidualCurves(np.asarray(s_grid, dtype=float), np.array(first), np.array(second))


def prop35_residual(md: MetricDef, x, s_grid: np.ndarray | None = None) -> ResidualCurves:
    """Adapted-frame residual curves for the projective-flatness identities.

    Same structure with the connection coefficients of alpha in place of the
    fitted difference tensor.
    """
    if md.phi is None:
        raise FinslerDomainError("prop35_residual needs phi data")
    x = np.asarray(x, dtype=float)
    frame = special_frame(md, x)
    b = frame.b_norm
    b2 = b * b
    if s_grid is None:
        s_grid = _default_s_grid(b)
    cd = covariant_data(md, x, (1.0, 0.0))
    r_f = frame.two_tensor(cd.r)
    s_f = frame.two_tensor(cd.s)
    g_f = frame.connection(christoffel(md, x))

    first, second = [], []
    for s in np.asarray(s_grid, dtype=float):
        pe = phi_eval(md.phi, float(s), b2)
        w = b2 - s * s
        lhs1 = s * s / (2.0 * w) * (-g_f[0, 0, 0] + 2.0 * g_f[1, 0, 1]) - 0.5 * g_f[0, 1, 1]
        rhs1 = b * pe.Psi * (s * s / w * r_f[0, 0] + r_f[1, 1])
        first.append(abs(lhs1 - rhs1))
        lhs2 = (2.0 * pe.Psi * w - 1.0) / w * b**3 * pe.Q * s_f[0, 1] \
            - 2.0 * b * pe.Psi * r_f[0, 1] * s
        rhs2 = -g_f[1, 0, 0] * s**3 / (2.0 * w) + 0.5 * (-g_f[1, 1, 1] + 2.0 * g_f[0, 0, 1]) * s
        second.append(abs(lhs2 - rhs2))
    return ResidualCurves(np.asarray(s_grid, dtype=float), np.array(first), np.array(second))


def kropina_connection_residual(md: MetricDef, x, fit: DouglasFit | None = None) -> float:
    """Adapted-frame residual of the two ratio relations tying the fitted
    connection difference to r_11 and r_22 for phi = c s + 1/s metrics."""
    x = np.asarray(x, dtype=float)
    if fit is None:
        fit = douglas_fit(md, x)
    frame = special_frame(md, x)
    cd = covariant_data(md, x, (1.0, 0.0))
    r_f = frame.two_tensor(cd.r)
    g_f = frame.connection(fit.G_kl)
    b = frame.b_norm
    res1 = abs(g_f[0, 0, 0] - g_f[1, 0, 1] - g_f[1, 1, 0] - r_f[0, 0] / b)
    res2 = abs(g_f[0, 1, 1] - r_f[1, 1] / b)
    return max(res1, res2)


# ---------------------------------------------------------------------------
# covariant-derivative conditions
# ---------------------------------------------------------------------------

RIJ_CASES = (
    "thm41_ii",
    "thm41_iii",
    "thm41_iv",
    "thm41_iv_constb",
    "thm41_v",
    "cor61_ii",
    "cor61_iii",
    "cor61_iv",
)


@dataclass
class ConditionReport:
    case: str
    tau: float | None
    residual: float
    verdict: str
    threshold: float = CONDITION_THRESHOLD
    samples_used: int = 1
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tau"] = None if self.tau is None else float(self.tau)
        d["residual"] = float(self.residual)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _sym_outer(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.outer(u, v) + np.outer(v, u)


def rij_condition_check(
    case_id: str,
    md: MetricDef,
    x,
    threshold: float = CONDITION_THRESHOLD,
) -> ConditionReport:
    """Fit the free scalar of the stated covariant-derivative condition and
    report the residual tensor norm.

    Constants come from the metric definition's phi parameters, never from
    the fit; the scalar tau is fitted per point because it is a function of x.
    """
    if case_id not in RIJ_CASES:
        raise ValueError(f"unknown condition case {case_id!r}")
    if md.phi is None:
        raise FinslerDomainError("condition checks need phi data")
    x = np.asarray(x, dtype=float)
    m = metric_at(md, x)
    cd = covariant_data(md, x, (1.0, 0.0))
    if m.b2 <= 0.0:
        raise ValueError("condition checks need b^2 > 0")
    spec = md.phi
    a, b_cov, b2 = m.a, m.b, m.b2
    bs = _sym_outer(b_cov, cd.s_vec)
    bb = np.outer(b_cov, b_cov)
    note = ""
    lhs = cd.r
    mm = family_m(spec)

    if case_id == "thm41_ii":
        k1, k2 = spec.k1, spec.k2
        pivot = 1.0 + k2 * b2
        if abs(pivot) < 1e-12:
            raise ValueError(
                f"condition coefficient undefined: 1 + k2 b^2 = {pivot} at {tuple(x)}"
            )
        if abs(pivot) < 1e-6:
            note = f"ill-conditioned: 1 + k2 b^2 = {pivot:.3e}"
        M = -2.0 * (3.0 * b2 * a + (k2 * b2 - 2.0) * bb)
        fixed = ((3.0 * k1 + k2 * k2) * b2 * b2 - 4.0) / (8.0 * b2 * pivot) * bs
    elif case_id == "thm41_iii":
        lhs = cd.nabla_b
        M = 2.0 * (mm * b2 * a - (mm + 1.0 + spec.k2 * b2) * bb)
        fixed = np.zeros((2, 2))
    elif case_id == "thm41_iv":
        k = spec.k
        M = 2.0 * (mm * b2 * a - (mm + 1.0 + k * b2) * bb)
        fixed = -(mm + 1.0 + 2.0 * k * b2) / ((mm - 1.0) * b2) * bs
    elif case_id == "thm41_iv_constb":
        M = 2.0 * (b2 * a - bb)
        fixed = -(1.0 / b2) * bs
    elif case_id == "thm41_v":
        M = None
        fixed = -(1.0 / b2) * bs
    elif case_id == "cor61_ii":
        c = linear_coefficient(spec)
        M = 2.0 * (-3.0 * b2 * a + 2.0 * bb)
        fixed = (3.0 * c * b2 * b2 - 4.0) / (8.0 * b2) * bs
    elif case_id == "cor61_iii":
        lhs = cd.nabla_b
        M = 2.0 * (mm * b2 * a - (mm + 1.0) * bb)
        fixed = np.zeros((2, 2))
    else:  # cor61_iv
        M = 2.0 * (mm * b2 * a - (mm + 1.0) * bb)
        fixed = -(mm + 1.0) / ((mm - 1.0) * b2) * bs

    target = lhs - fixed
    if M is None:
        tau = None
        mis = target
        rhs_scale = float(np.linalg.norm(fixed))
    else:
        denom = float(np.sum(M * M))
        tau = float(np.sum(M * target) / denom) if denom > 0.0 else 0.0
        mis = target - tau * M
        rhs_scale = float(np.linalg.norm(fixed + tau * M))
    num = float(np.linalg.norm(mis))
    scale = max(float(np.linalg.norm(lhs)), rhs_scale, 1e-30)
    residual = num / scale if num > 0.0 else 0.0
    return ConditionReport(
        case=case_id,
        tau=tau,
        residual=residual,
        verdict="pass" if residual <= threshold else "fail",
        threshold=threshold,
        note=note,
    )


# ---------------------------------------------------------------------------
# spray-form fits and projective-factor formulas
# ---------------------------------------------------------------------------

SPRAY_FORM_CASES = (
    "kropina_linear",
    "thm41_ii",
    "thm41_iii",
    "thm41_iv",
    "thm41_v",
    "kropina_linear_alt",
    "thm41_ii_alt",
)

# spray-form case -> condition case supplying tau
_TAU_SOURCE = {
    "thm41_ii": "thm41_ii",
    "thm41_iii": "thm41_iii",
    "thm41_iv": "thm41_iv",
    "thm41_ii_alt": "cor61_ii",
}


@dataclass
class SprayFormFit:
    case: str
    rho: np.ndarray  # fitted 1-form coefficients
    tau: float | None
    residual: float
    samples_used: int

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "rho": list(map(float, self.rho)),
            "tau": None if self.tau is None else float(self.tau),
            "residual": float(self.residual),
            "samples_used": int(self.samples_used),
        }


def spray_form_fit(
    case_id: str,
    md: MetricDef,
    x,
    tau: float | None = None,
    n_angles: int = 24,
) -> SprayFormFit:
    """Least-squares fit of the free 1-form in a spray-of-alpha normal form.

    The sampled vector equation is linear in rho; everything else is fixed by
    the metric data and, where the case requires it, the scalar tau obtained
    from the matching covariant-derivative condition.
    """
    if case_id not in SPRAY_FORM_CASES:
        raise ValueError(f"unknown spray-form case {case_id!r}")
    if md.phi is None:
        raise FinslerDomainError("spray-form fits need phi data")
    x = np.asarray(x, dtype=float)
    m = metric_at(md, x)
    cd = covariant_data(md, x, (1.0, 0.0))
    gamma = christoffel(md, x)
    spec = md.phi
    b2 = m.b2
    if b2 <= 0.0:
        raise ValueError("spray-form fits need b^2 > 0")
    if tau is None and case_id in _TAU_SOURCE:
        tau = rij_condition_check(_TAU_SOURCE[case_id], md, x).tau
    mm = family_m(spec)

    angles = [2.0 * np.pi * t / n_angles for t in range(n_angles)]
    ys = np.array([[np.cos(t), np.sin(t)] for t in angles])
    rows, targets = [], []
    g_scale = 0.0
    for y in ys:
        g_alpha = 0.5 * np.einsum("ijk,j,k->i", gamma, y, y)
        alpha2 = float(y @ m.a @ y)
        beta = float(m.b @ y)
        r00 = float(y @ cd.r @ y)
        s0 = float(cd.s_vec @ y)
        term = _spray_form_terms(
            case_id, spec, tau, alpha2, beta, r00, s0, b2, m.b_up, cd.s_up
        )
        v = g_alpha - term
        g_scale = max(g_scale, float(np.max(np.abs(g_alpha))), float(np.max(np.abs(term))))
        for i in range(2):
            rows.append([y[0] * y[i], y[1] * y[i]])
            targets.append(v[i])
    rows = np.asarray(rows)
    targets = np.asarray(targets)
    rho, *_ = np.linalg.lstsq(rows, targets, rcond=None)
    misfit = rows @ rho - targets
    rms = float(np.sqrt(np.mean(misfit**2)))
    scale = max(g_scale, 1e-14)
    return SprayFormFit(
        case=case_id, rho=rho, tau=tau, residual=rms / scale, samples_used=len(ys)
    )


def _spray_form_terms(case_id, spec, tau, alpha2, beta, r00, s0, b2, b_up, s_up):
    if case_id == "kropina_linear":
        c = linear_coefficient(spec)
        return -r00 / (2.0 * b2) * b_up - (alpha2 - c * beta * beta) / (2.0 * b2) * s_up
    if case_id == "kropina_linear_alt":
        return -r00 / (2.0 * b2) * b_up - alpha2 / (2.0 * b2) * s_up
    if case_id == "thm41_ii":
        k1, k2 = spec.k1, spec.k2
        coef_s = (
            (k1 - k2 * k2) / (8.0 * (1.0 + k2 * b2)) * (3.0 * b2 * alpha2 - beta * beta)
            + (k2 / 2.0 - 3.0 / (4.0 * b2)) * alpha2
            - k2 / b2 * beta * beta
        )
        return tau * (3.0 * alpha2 + k2 * beta * beta) * b_up + coef_s * s_up
    if case_id == "thm41_ii_alt":
        c = linear_coefficient(spec)
        coef_s = c / 8.0 * (3.0 * b2 * alpha2 - beta * beta) - 3.0 * alpha2 / (4.0 * b2)
        return 3.0 * tau * alpha2 * b_up + coef_s * s_up
    if case_id == "thm41_iii":
        mm, k2 = spec.m, spec.k2
        return -tau * (mm * alpha2 - k2 * beta * beta) * b_up
    if case_id == "thm41_iv":
        mm, k = spec.m, spec.k
        coef_s = 1.0 / (1.0 - mm) * ((2.0 * k + mm / b2) * alpha2 - k / b2 * beta * beta)
        return -tau * (mm * alpha2 - k * beta * beta) * b_up + coef_s * s_up
    if case_id == "thm41_v":
        mm, k = spec.m, spec.k
        return -((mm - 2.0) * alpha2 + k * beta * beta) / ((mm - 1.0) * b2) * s_up
    raise ValueError(case_id)


PFACTOR_CASES = (
    "kropina_linear",
    "thm41_ii",
    "thm41_iii",
    "thm41_iv",
    "thm41_v",
    "flat_chart",
)


@dataclass
class PFactorResult:
    case: str
    P: float
    ok: bool
    note: str = ""


def projective_factor_formula(
    case_id: str,
    md: MetricDef,
    x,
    y,
    rho: np.ndarray | None = None,
    tau: float | None = None,
) -> PFactorResult:
    """Closed-form projective factor for one normal-form case.

    ``rho`` defaults to the spray-form fit at x; a large spray-form residual
    flags the result instead of raising, since probing metrics outside a
    case's hypotheses is a legitimate experiment.
    """
    if case_id not in PFACTOR_CASES:
        raise ValueError(f"unknown projective-factor case {case_id!r}")
    if md.phi is None:
        raise FinslerDomainError("projective-factor formulas need phi data")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    spec = md.phi

    if case_id == "flat_chart":
        from .jets import eval_jet

        c = linear_coefficient(spec)
        eta1 = eval_jet(md.b[0], x, 1).partial((1, 0))
        F = finsler_norm(md, x, y)
        return PFactorResult(case_id, c * eta1 * y[0] ** 2 / (2.0 * F), True)

    m = metric_at(md, x)
    cd = covariant_data(md, x, y)
    b2 = m.b2
    alpha2 = float(y @ m.a @ y)
    alpha = float(np.sqrt(alpha2))
    beta = float(m.b @ y)
    s = beta / alpha
    r00, s0 = cd.r00, cd.s0
    ok = True
    note = ""
    fit = None
    if rho is None or (tau is None and case_id in _TAU_SOURCE):
        fit = spray_form_fit(case_id, md, x, tau=tau)
        if rho is None:
            rho = fit.rho
        if tau is None:
            tau = fit.tau
        if fit.residual > 1e-6:
            ok = False
            note = f"spray-form residual {fit.residual:.3e} exceeds 1e-6"
    rho_y = float(np.asarray(rho) @ y)

    if case_id == "kropina_linear":
        c = linear_coefficient(spec)
        P = rho_y - ((alpha2 - c * beta * beta) * s0 + r00 * beta) / (
            b2 * (alpha2 + c * beta * beta)
        )
    elif case_id == "thm41_ii":
        k1, k2 = spec.k1, spec.k2
        cc = k1 - k2 * k2
        dd = alpha2**2 + cc * beta**4 + k2 * beta * beta * (2.0 * alpha2 + k2 * beta * beta)
        t_num = cc * (
            4.0 * beta * beta * (2.0 * beta * beta - b2 * alpha2)
            + 3.0 * b2 * b2 * (alpha2**2 + cc * beta**4)
            + k2 * b2 * beta * beta * (6.0 * b2 * alpha2 + 4.0 * beta * beta + 3.0 * k2 * b2 * beta * beta)
        )
        T = t_num / (8.0 * b2 * (1.0 + k2 * b2) * dd)
        P = (
            rho_y
            + 2.0 * tau * beta * (3.0 - 2.0 * cc * beta**4 / dd)
            + ((k2 * b2 - 3.0) / (2.0 * b2) + T) * s0
        )
    elif case_id == "thm41_iii":
        mm, k2 = spec.m, spec.k2
        pe = phi_eval(spec, s, b2)
        P = rho_y + tau * alpha * (
            s * (-mm + k2 * s * s) - s * s * (1.0 + k2 * s * s) * pe.dphi / pe.phi
        )
    elif case_id == "thm41_iv":
        mm, k = spec.m, spec.k
        P = rho_y - 2.0 * mm * tau * beta - 2.0 * (mm + k * b2) / ((mm - 1.0) * b2) * s0
    else:  # thm41_v
        mm, k = spec.m, spec.k
        pe = phi_eval(spec, s, b2)
        P = rho_y + (
            s * (k * s * s - 1.0) * pe.dphi / pe.phi - k * s * s - mm + 2.0
        ) / ((mm - 1.0) * b2) * s0
    return PFactorResult(case_id, float(P), ok, note)


# ---------------------------------------------------------------------------
# classifier
# ---------------------------------------------------------------------------

# condition cases compatible with each phi family
_FAMILY_CASES = {
    "kropina_linear": (),
    "thm41_ii": ("thm41_ii",),
    "thm41_iii": ("thm41_iii",),
    "thm41_iv": ("thm41_iv", "thm41_iv_constb"),
    "thm41_iv_constb": ("thm41_iv_constb",),
    "thm41_v": ("thm41_v",),
    "m_kropina": ("cor61_iv",),
}

_FAMILY_LABEL = {
    "kropina_linear": "thm41_i",
    "thm41_ii": "thm41_ii",
    "thm41_iii": "thm41_iii",
    "thm41_iv": "thm41_iv",
    "thm41_iv_constb": "thm41_iv",
    "thm41_v": "thm41_v",
    "m_kropina": "thm41_iv",
}


@dataclass
class ClassifyReport:
    label: str
    douglas: bool
    douglas_residual: float
    passing_cases: list = field(default_factory=list)
    case_reports: dict = field(default_factory=dict)
    samples: int = 0

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "douglas": self.douglas,
            "douglas_residual": float(self.douglas_residual),
            "passing_cases": list(self.passing_cases),
            "case_reports": {
                k: [r.to_dict() for r in v] for k, v in self.case_reports.items()
            },
            "samples": self.samples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def classify(
    md: MetricDef,
    region_samples,
    douglas_threshold: float = DOUGLAS_THRESHOLD,
    condition_threshold: float = CONDITION_THRESHOLD,
) -> ClassifyReport:
    """Douglas test plus the family-compatible condition checks at each point."""
    if md.phi is None:
        raise FinslerDomainError("classification needs phi data")
    pts = [np.asarray(p, dtype=float) for p in region_samples]
    if len(pts) < 5:
        raise ValueError("classification needs at least 5 sample points")
    worst = 0.0
    for p in pts:
        fit = douglas_fit(md, p, threshold=douglas_threshold)
        worst = max(worst, fit.residual)
    if worst > douglas_threshold:
        return ClassifyReport(
            label="not_douglas", douglas=False, douglas_residual=worst, samples=len(pts)
        )
    family = md.phi.family
    case_reports: dict[str, list[ConditionReport]] = {}
    passing = []
    for case in _FAMILY_CASES.get(family, ()):
        reports = [
            rij_condition_check(case, md, p, threshold=condition_threshold) for p in pts
        ]
        case_reports[case] = reports
        if all(r.verdict == "pass" for r in reports):
            passing.append(case)
    label = _FAMILY_LABEL.get(family, "unknown")
    if family != "kropina_linear" and not passing:
        # Douglas verdict holds numerically but no compatible normal form does
        label = f"{label}?"
    return ClassifyReport(
        label=label,
        douglas=True,
        douglas_residual=worst,
        passing_cases=passing,
        case_reports=case_reports,
        samples=len(pts),
    )
