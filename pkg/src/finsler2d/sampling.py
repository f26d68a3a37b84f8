"""Seeded sampling utilities: points, admissible directions, random metrics.

The default region [0.5, 1.5]^2 keeps clear of the coordinate singularities
of the norm-based example metrics at the origin.  Direction sampling filters
out singular loci (|s| below a fraction of b, phi-domain violations,
degenerate scalars) so downstream fits only ever see well-defined spray
values.
"""

from __future__ import annotations

import numpy as np

from .exprlang import MetricDef, parse_expr
from .finsler import FinslerDomainError, SprayField
from .geometry import GeometryError, metric_at
from .jets import JetDomainError
from .phi import PhiDomainError

DEFAULT_REGION = ((0.5, 1.5), (0.5, 1.5))
DEFAULT_S_MIN_FRAC = 0.05


def sample_points(rng: np.random.Generator, n: int, region=DEFAULT_REGION) -> np.ndarray:
    lows = np.array([r[0] for r in region])
    highs = np.array([r[1] for r in region])
    return rng.uniform(lows, highs, size=(n, len(region)))


def direction_samples(
    md: MetricDef,
    x,
    n_angles: int = 24,
    s_min_frac: float = DEFAULT_S_MIN_FRAC,
    min_valid: int = 12,
    delta_rel_min: float = 1e-3,
) -> np.ndarray:
    """Equally spaced unit directions at x, filtered by domain constraints.

    Rejects directions where |s| < s_min_frac * b, where phi or the spray
    scalars are undefined or nearly degenerate (Delta close to zero relative
    to its constituent terms), or where the metric data fails.  Raises when
    fewer than ``min_valid`` directions survive.
    """
    from .phi import phi_eval

    m = metric_at(md, x)
    b_norm = np.sqrt(max(m.b2, 0.0))
    s_min = s_min_frac * b_norm
    out = []
    for t in range(n_angles):
        ang = 2.0 * np.pi * t / n_angles
        y = np.array([np.cos(ang), np.sin(ang)])
        alpha = float(np.sqrt(y @ m.a @ y))
        beta = float(m.b @ y)
        s = beta / alpha
        if b_norm > 0.0 and abs(s) < s_min:
            continue
        if md.phi is not None:
            try:
                pe = phi_eval(md.phi, s, m.b2)
                delta_scale = 1.0 + abs(s * pe.Q) + abs((m.b2 - s * s) * pe.Qp)
                if abs(pe.Delta) < delta_rel_min * delta_scale:
                    continue
                SprayField(md, x, y, 0)
            except (FinslerDomainError, PhiDomainError, JetDomainError, GeometryError):
                continue
        out.append(y)
    if len(out) < min_valid:
        raise ValueError(
            f"only {len(out)} of {n_angles} directions at {tuple(np.asarray(x))} are admissible"
        )
    return np.array(out)


def random_direction(rng: np.random.Generator, md: MetricDef, x, s_min_frac=DEFAULT_S_MIN_FRAC):
    """One admissible random direction at x."""
    dirs = direction_samples(md, x, n_angles=24, s_min_frac=s_min_frac, min_valid=1)
    return dirs[rng.integers(len(dirs))]


def random_smooth_metric(rng: np.random.Generator, phi=None, amplitude: float = 0.15) -> MetricDef:
    """A random smooth metric definition, positive definite on [0, 2]^2.

    a = I + small smooth perturbation (kept diagonally dominant), b a smooth
    nonvanishing covector of moderate norm.
    """

    def wobble():
        c1 = rng.uniform(-amplitude, amplitude)
        c2 = rng.uniform(-amplitude, amplitude)
        p1 = rng.uniform(0.3, 1.2)
        p2 = rng.uniform(0.3, 1.2)
        return f"({c1:.6f})*sin({p1:.6f}*x1+{p2:.6f}*x2)+({c2:.6f})*cos({p2:.6f}*x1-{p1:.6f}*x2)"

    a11 = parse_expr(f"1+{wobble()}", 2)
    a22 = parse_expr(f"1+{wobble()}", 2)
    a12 = parse_expr(f"0.5*({wobble()})", 2)
    b0 = rng.uniform(0.45, 0.7)
    b1 = parse_expr(f"{b0:.6f}+0.5*({wobble()})", 2)
    b2 = parse_expr(f"0.3*({wobble()})+0.1*x1", 2)
    return MetricDef(2, [[a11, a12], [a12, a22]], [b1, b2], phi)


_EXPR_LEAVES = ("x1", "x2", "const")
_EXPR_UNARY = ("sin", "cos", "exp", "sqrt1p", "log1p", "neg")
_EXPR_BINARY = ("+", "-", "*", "/")


def random_expr_text(rng: np.random.Generator, depth: int = 3) -> str:
    """A random smooth expression, kept tame on [0.6, 1.4]^2.

    sqrt and log only ever see arguments bounded away from zero, divisions
    see denominators of the form (1 + u^2 + eps), so every draw is globally
    smooth on the sampling region with moderate derivative growth.
    """
    if depth <= 0 or rng.random() < 0.25:
        leaf = _EXPR_LEAVES[rng.integers(len(_EXPR_LEAVES))]
        if leaf == "const":
            return f"{rng.uniform(0.3, 1.5):.4f}"
        return leaf
    if rng.random() < 0.45:
        op = _EXPR_UNARY[rng.integers(len(_EXPR_UNARY))]
        inner = random_expr_text(rng, depth - 1)
        if op == "sqrt1p":
            return f"sqrt(1+({inner})^2)"
        if op == "log1p":
            return f"log(1+({inner})^2)"
        if op == "neg":
            return f"-({inner})"
        return f"{op}({inner})"
    op = _EXPR_BINARY[rng.integers(len(_EXPR_BINARY))]
    left = random_expr_text(rng, depth - 1)
    right = random_expr_text(rng, depth - 1)
    if op == "/":
        return f"({left})/(1.5+({right})^2)"
    return f"({left}){op}({right})"
