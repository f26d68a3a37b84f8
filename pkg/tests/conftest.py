import numpy as np
import pytest

from finsler2d.exprlang import MetricDef, parse_expr
from finsler2d.phi import PhiSpec


def relerr(a, b, floor=1e-30):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), floor)
    return float(np.max(np.abs(a - b)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20240202)


def euclidean_metric(phi=None, b=("0.6", "0")):
    one = parse_expr("1", 2)
    zero = parse_expr("0", 2)
    return MetricDef(2, [[one, zero], [zero, one]], [parse_expr(b[0], 2), parse_expr(b[1], 2)], phi)


def conformal_metric(factor_text, phi=None, b=("1", "0")):
    f = parse_expr(factor_text, 2)
    zero = parse_expr("0", 2)
    return MetricDef(2, [[f, zero], [zero, f]], [parse_expr(b[0], 2), parse_expr(b[1], 2)], phi)


SMOOTH_FAMILIES = [
    PhiSpec("kropina_linear", c=1.0),
    PhiSpec("kropina_linear", c=0.0),
    PhiSpec("thm41_ii", k1=0.5, k2=0.3),
    PhiSpec("thm41_iii", k1=0.4, k2=-0.2, m=2.0),
    PhiSpec("thm41_iv", m=2.0, k=0.3),
    PhiSpec("thm41_iv_constb", m=2.0, b=1.2),
    PhiSpec("thm41_v", m=2.0, k=0.25, b=1.2),
    PhiSpec("m_kropina", m=-2.0),
]
