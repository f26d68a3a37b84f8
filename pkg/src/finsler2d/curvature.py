"""Riemann curvature of the spray, 2D flag curvature, Berwald h-curvature
tensors, the K-curvature component K12, and the coordinate-free
projective-flatness test (Douglas + K12 = 0).

Everything is read from one jet evaluation of the spray: the curvature
R^i_k keeps enough remaining order that two more y-derivatives (the
h-curvature tensors) and one final horizontal derivative (K12) are still
exact.  K12 requires third x-derivatives of the metric fields, the deepest
demand in the engine; the jet pipeline requests total order five for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprlang import MetricDef
from .finsler import X_SLOTS, Y_SLOTS, SprayField

K12_ZERO_TOL = 1e-8


@dataclass
class CurvatureEval:
    x: np.ndarray
    y: np.ndarray
    R: np.ndarray  # R^i_k
    K: float  # scalar flag curvature (dim 2)
    H4: np.ndarray  # H^i_{j kl}
    H2: np.ndarray  # H_{jk}
    H1: np.ndarray  # H_j
    K12: float


class CurvatureField:
    """Jets of the curvature stack at one (x, y)."""

    def __init__(self, md: MetricDef, x, y, order: int = 5):
        self.sf = SprayField(md, x, y, order)
        sf = self.sf
        G, yp = sf.G, sf.yp

        def r_entry(i, k):
            term = 2.0 * G[i].deriv(X_SLOTS[k])
            for j in range(2):
                term = term - yp[j] * G[i].deriv(X_SLOTS[j]).deriv(Y_SLOTS[k])
                term = term + 2.0 * (G[j] * G[i].deriv(Y_SLOTS[j]).deriv(Y_SLOTS[k]))
                term = term - G[i].deriv(Y_SLOTS[j]) * G[j].deriv(Y_SLOTS[k])
            return term

        self.R = [[r_entry(i, k) for k in range(2)] for i in range(2)]

    def riemann(self) -> np.ndarray:
        return np.array([[self.R[i][k].value for k in range(2)] for i in range(2)])

    def flag_curvature(self) -> float:
        # R^i_k has eigenvalues 0 (along y) and K F^2; the trace picks out K F^2
        trace = self.R[0][0].value + self.R[1][1].value
        return trace / self.sf.F.value ** 2

    def flag_curvature_poly(self):
        return (self.R[0][0] + self.R[1][1]) / (self.sf.F * self.sf.F)

    def h_tensor_polys(self):
        R, yp = self.R, self.sf.yp
        h4 = [[[[None for _ in range(2)] for _ in range(2)] for _ in range(2)] for _ in range(2)]
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    for l in range(2):
                        h4[i][j][k][l] = (1.0 / 3.0) * (
                            R[i][l].deriv(Y_SLOTS[j]).deriv(Y_SLOTS[k])
                            - R[i][k].deriv(Y_SLOTS[j]).deriv(Y_SLOTS[l])
                        )
        h2 = [[h4[0][j][k][0] + h4[1][j][k][1] for k in range(2)] for j in range(2)]
        h1 = []
        for j in range(2):
            h_0j = yp[0] * h2[0][j] + yp[1] * h2[1][j]
            h_j0 = h2[j][0] * yp[0] + h2[j][1] * yp[1]
            h1.append(2.0 * h_0j + h_j0)
        return h4, h2, h1

    def k_curvature(self) -> float:
        sf = self.sf
        _, _, h1 = self.h_tensor_polys()
        n_val = np.array(
            [[sf.G[m].deriv(Y_SLOTS[j]).value for j in range(2)] for m in range(2)]
        )
        conn = np.array(
            [
                [
                    [sf.G[m].deriv(Y_SLOTS[i]).deriv(Y_SLOTS[j]).value for j in range(2)]
                    for i in range(2)
                ]
                for m in range(2)
            ]
        )
        h_vals = np.array([h.value for h in h1])

        def h_semicolon(i, j):
            val = h1[i].deriv(X_SLOTS[j]).value
            for m in range(2):
                val -= h1[i].deriv(Y_SLOTS[m]).value * n_val[m, j]
                val -= h_vals[m] * conn[m][i][j]
            return val

        return h_semicolon(0, 1) - h_semicolon(1, 0)

    def scalar_flag_consistency(self) -> float:
        """Relative deviation of H_j from the scalar-flag-curvature identity
        H_j = (n+1)((1/3) F^2 K_{y^j} + K F F_{y^j}) at n = 2."""
        sf = self.sf
        _, _, h1 = self.h_tensor_polys()
        lam = self.flag_curvature_poly()
        ref = np.empty(2)
        got = np.empty(2)
        for j in range(2):
            lam_y = lam.deriv(Y_SLOTS[j]).value
            f_y = sf.F.deriv(Y_SLOTS[j]).value
            ref[j] = 3.0 * (sf.F.value**2 * lam_y / 3.0 + lam.value * sf.F.value * f_y)
            got[j] = h1[j].value
        scale = max(np.max(np.abs(ref)), np.max(np.abs(got)), 1e-14)
        return float(np.max(np.abs(got - ref)) / scale)


def riemann_curvature(md: MetricDef, x, y) -> np.ndarray:
    """R^i_k of the spray of F at (x, y)."""
    return CurvatureField(md, x, y, order=2).riemann()


def flag_curvature_2d(md: MetricDef, x, y) -> float:
    return CurvatureField(md, x, y, order=2).flag_curvature()


def h_tensors(md: MetricDef, x, y):
    """(H4, H2, H1) as value arrays."""
    cf = CurvatureField(md, x, y, order=4)
    h4, h2, h1 = cf.h_tensor_polys()
    H4 = np.array(
        [
            [[[h4[i][j][k][l].value for l in range(2)] for k in range(2)] for j in range(2)]
            for i in range(2)
        ]
    )
    H2 = np.array([[h2[j][k].value for k in range(2)] for j in range(2)])
    H1 = np.array([h.value for h in h1])
    return H4, H2, H1


def k_curvature(md: MetricDef, x, y) -> float:
    """K12 = H_{1;2} - H_{2;1} at (x, y)."""
    return CurvatureField(md, x, y, order=5).k_curvature()


def curvature_eval(md: MetricDef, x, y) -> CurvatureEval:
    cf = CurvatureField(md, x, y, order=5)
    H4, H2, H1 = h_tensors(md, x, y)
    return CurvatureEval(
        x=np.asarray(x, dtype=float),
        y=np.asarray(y, dtype=float),
        R=cf.riemann(),
        K=cf.flag_curvature(),
        H4=H4,
        H2=H2,
        H1=H1,
        K12=cf.k_curvature(),
    )


@dataclass
class MatsumotoReport:
    verdict: str
    douglas_ok: bool
    douglas_max: float
    k12_max: float
    samples: int
    k12_tol: float = K12_ZERO_TOL

    @property
    def projectively_flat(self) -> bool:
        return self.verdict == "projectively_flat"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "douglas": {"ok": self.douglas_ok, "max_residual": float(self.douglas_max)},
            "k12": {"max_abs_normalized": float(self.k12_max), "tol": float(self.k12_tol)},
            "samples": int(self.samples),
        }


def matsumoto_pflat_test(
    md: MetricDef,
    region_samples,
    douglas_threshold: float = 1e-7,
    k12_tol: float = K12_ZERO_TOL,
    directions_per_point: int = 2,
) -> MatsumotoReport:
    """Coordinate-free projective-flatness verdict: Douglas and K12 = 0.

    K12 is degree-one homogeneous in y, so it is thresholded after
    normalizing each probe direction to unit alpha-norm.
    """
    from .criteria import douglas_fit
    from .geometry import metric_at
    from .sampling import direction_samples

    from .phi import PhiDomainError, phi_eval

    pts = [np.asarray(p, dtype=float) for p in region_samples]
    douglas_max = 0.0
    k12_max = 0.0
    for p in pts:
        fit = douglas_fit(md, p, threshold=douglas_threshold)
        douglas_max = max(douglas_max, fit.residual)
        m = metric_at(md, p)
        dirs = direction_samples(md, p)
        # probe only well-conditioned directions: comfortably away from the
        # singular ratio locus, from vanishing phi (the norm boundary), and
        # from degenerate Delta, all of which amplify roundoff in the
        # fifth-order jet pipeline
        scored = []
        b_norm = np.sqrt(m.b2)
        for y in dirs:
            alpha = float(np.sqrt(y @ m.a @ y))
            s = float(m.b @ y) / alpha
            try:
                pe = phi_eval(md.phi, s, m.b2)
            except PhiDomainError:
                continue
            delta_scale = 1.0 + abs(s * pe.Q) + abs((m.b2 - s * s) * pe.Qp)
            score = (
                (abs(pe.Delta) / delta_scale)
                * (abs(pe.phi) / (1.0 + abs(pe.phi)))
                * (abs(s) / b_norm)
            )
            scored.append((score, y, alpha))
        scored.sort(key=lambda t: -t[0])
        for _, y, alpha in scored[: max(1, directions_per_point)]:
            k12 = k_curvature(md, p, y / alpha)
            k12_max = max(k12_max, abs(k12))
    douglas_ok = douglas_max <= douglas_threshold
    flat = douglas_ok and k12_max <= k12_tol
    return MatsumotoReport(
        verdict="projectively_flat" if flat else "not_projectively_flat",
        douglas_ok=douglas_ok,
        douglas_max=douglas_max,
        k12_max=k12_max,
        samples=len(pts),
        k12_tol=k12_tol,
    )
